use log::info;
use ppde_core::error::Error;
use ppde_core::frozen::{envelope_values, frozen_replay, hitting_gap_diagnostic, sandwich_check};
use ppde_core::model::{monotonicity_probes, validate as validate_data};
use ppde_core::nonlinear::{positive_hitting_check, snell_one_step_checks, snell_upper, Lattice};
use ppde_core::rbsde::{
    dpp_residual, solve_penalized, solve_rbsde_tree, value_functional, DppOptions, DppVariant, Penalty, PenaltyScheme,
    TreeControl, TreeOptions, ValueMethod, ValueOptions,
};
use ppde_core::{ExperimentConfig, PathState, ProblemData, Result};
use serde_json::json;

use crate::artifacts::{num, Outcome, Table};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.96;

fn origin(data: &ProblemData) -> PathState {
    PathState::origin(0.0, data.dim())
}

fn tree_opts(cfg: &ExperimentConfig, n_steps: usize) -> TreeOptions {
    TreeOptions { n_steps, control: TreeControl::Sup, ..cfg.value.tree.clone() }
}

pub fn value(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (data, tr) = cfg.build_problem()?;
    let est = value_functional(&data, &origin(&data), &cfg.value)?;
    let half = Z95 * est.std_error;
    let mut t = Table::new(
        "value",
        &[
            "instance",
            "transformed",
            "method",
            "n_steps",
            "n_paths",
            "estimate",
            "std_error",
            "ci_low",
            "ci_high",
            "original",
        ],
    );
    // At the origin the change of variable is the identity on values.
    let original = tr.map_or(est.value, |tr| tr.back(0.0, est.value));
    t.push(vec![
        data.name.clone(),
        tr.is_some().to_string(),
        est.method.clone(),
        cfg.value.n_steps.to_string(),
        if est.family_size == 0 { "0".into() } else { cfg.value.n_paths.to_string() },
        num(est.value),
        num(est.std_error),
        num(est.value - half),
        num(est.value + half),
        num(original),
    ]);
    Ok(Outcome::ok(json!({ "instance": data.name, "transform": tr, "estimate": est, "original": original }), vec![t]))
}

pub fn converge(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (data, _) = cfg.build_problem()?;
    let root = origin(&data);
    let mut t = Table::new("converge", &["sweep", "level", "quantity", "estimate", "std_error"]);
    let mut warnings = Vec::new();
    for &n in &cfg.converge.steps {
        info!("steps {n}");
        let e = value_functional(&data, &root, &ValueOptions { n_steps: n, ..cfg.value.clone() })?;
        t.push(vec!["steps".into(), n.to_string(), "value".into(), num(e.value), num(e.std_error)]);
    }
    for &p in &cfg.converge.paths {
        info!("paths {p}");
        let opts = ValueOptions { n_paths: p, method: ValueMethod::Lsmc, ..cfg.value.clone() };
        let e = value_functional(&data, &root, &opts)?;
        t.push(vec!["paths".into(), p.to_string(), "value".into(), num(e.value), num(e.std_error)]);
    }
    let mut reflected = None;
    if data.dim() == 1 {
        let topts = tree_opts(cfg, cfg.value.n_steps);
        reflected = Some(solve_rbsde_tree(&data, &root, &topts)?.y0);
        for &m in &cfg.converge.m {
            info!("penalty {m}");
            let y = solve_penalized(&data, &root, &topts, Penalty { m, scheme: PenaltyScheme::Implicit })?.y0;
            t.push(vec!["m".into(), num(m), "penalized".into(), num(y), "0".into()]);
        }
        for &a in &cfg.converge.alphas {
            info!("alpha {a}");
            let r = envelope_values(&data, a, cfg.sandwich.m, &cfg.sandwich.scheme)?;
            for (q, v) in [("psi0", r.psi0), ("phi0", r.phi0), ("gap", r.gap)] {
                t.push(vec!["alpha".into(), num(a), q.into(), num(v), "0".into()]);
            }
        }
    } else if !cfg.converge.m.is_empty() || !cfg.converge.alphas.is_empty() {
        warnings.push("penalty and level sweeps need a one-dimensional problem; skipped".to_string());
    }
    Ok(Outcome::ok(json!({ "instance": data.name, "reflected_tree": reflected, "warnings": warnings }), vec![t]))
}

pub fn sandwich(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (data, _) = cfg.build_problem()?;
    let est = value_functional(&data, &origin(&data), &cfg.value)?;
    // Discretization slack of the reference value plus its sampling error.
    let u0_tol = 1e-2 * est.value.abs().max(1.0) + Z95 * est.std_error;
    let r = sandwich_check(&data, est.value, u0_tol, &cfg.sandwich)?;
    let mut t = Table::new(
        "sandwich",
        &["alpha", "theta0", "gamma0", "rho0_alpha", "correction", "psi0", "phi0", "gap", "u0", "inside"],
    );
    for row in &r.rows {
        let inside = row.psi0 - r.slack <= r.u0 && r.u0 <= row.phi0 + r.slack;
        t.push(vec![
            num(row.alpha),
            num(row.theta0),
            num(row.gamma0),
            num(row.rho0_alpha),
            num(row.correction),
            num(row.psi0),
            num(row.phi0),
            num(row.gap),
            num(r.u0),
            inside.to_string(),
        ]);
    }
    Ok(Outcome::checked(&r, vec![t], &[("sandwich", r.holds)]))
}

pub fn snell(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (data, _) = cfg.build_problem()?;
    if data.dim() != 1 || data.path_dependent {
        return Err(Error::Config("snell needs a one-dimensional Markovian problem".into()));
    }
    let s = &cfg.snell;
    let lat = Lattice::standard(0.0, data.horizon, s.n_steps, s.l, s.c0, s.dx)?;
    let n = s.n_steps;
    let reward = |i: usize, x: f64| {
        let st = PathState::scalar(lat.time(i), x, x.max(0.0), x.min(0.0));
        if i == n {
            data.xi(&st)
        } else {
            data.h(&st)
        }
    };
    let res = snell_upper(&lat, &reward, s.stop_cap);
    let (sup_defect, mart_defect) = snell_one_step_checks(&lat, &res);
    let mut field = Table::new("snell", &["step", "time", "x", "reward", "envelope", "stop", "action"]);
    for i in 0..=n {
        for o in 0..res.envelope[i].len() {
            field.push(vec![
                i.to_string(),
                num(lat.time(i)),
                num(lat.x(o as i64 - i as i64)),
                num(res.reward[i][o]),
                num(res.envelope[i][o]),
                (res.stop[i][o] as u8).to_string(),
                res.action[i].get(o).map_or(String::new(), |a| a.to_string()),
            ]);
        }
    }
    let mut hit = Table::new("snell_hitting", &["delta", "lower_expectation"]);
    let mut hitting = Vec::new();
    for &d in &s.deltas {
        let v = positive_hitting_check(&lat, d);
        hit.push(vec![num(d), num(v)]);
        hitting.push(json!({ "delta": d, "lower_expectation": v }));
    }
    let positive = hitting.iter().all(|h| h["lower_expectation"].as_f64() > Some(0.0));
    let report = json!({
        "instance": data.name,
        "value": res.value,
        "dt": lat.dt,
        "dx": lat.dx,
        "supermartingale_defect": sup_defect,
        "martingale_defect": mart_defect,
        "hitting": hitting,
    });
    let checks = [
        ("supermartingale", sup_defect <= 1e-12),
        ("martingale", mart_defect <= 1e-12),
        ("positive_hitting", positive),
    ];
    Ok(Outcome::checked(report, vec![field, hit], &checks))
}

pub fn dpp(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (data, _) = cfg.build_problem()?;
    let delta = match cfg.dpp.variant {
        DppVariant::HittingDelta { delta } => delta,
        DppVariant::Deterministic => 0.5,
    };
    let mut refines = vec![1, cfg.dpp.refine];
    refines.dedup();
    let mut t = Table::new("dpp", &["variant", "delta", "refine", "direct", "nested", "residual", "inner_solves"]);
    let mut rows = Vec::new();
    for variant in [DppVariant::Deterministic, DppVariant::HittingDelta { delta }] {
        for &refine in &refines {
            let opts = DppOptions { variant, refine, ..cfg.dpp.clone() };
            let r = dpp_residual(&data, &origin(&data), &opts)?;
            let (name, d) = match variant {
                DppVariant::Deterministic => ("deterministic", String::new()),
                DppVariant::HittingDelta { delta } => ("hitting_delta", num(delta)),
            };
            t.push(vec![
                name.into(),
                d,
                refine.to_string(),
                num(r.direct),
                num(r.nested),
                num(r.residual),
                r.inner_solves.to_string(),
            ]);
            rows.push(json!({ "variant": variant, "refine": refine, "result": r }));
        }
    }
    Ok(Outcome::ok(
        json!({ "instance": data.name, "n_steps": cfg.dpp.n_steps, "t1": cfg.dpp.t1, "rows": rows }),
        vec![t],
    ))
}

pub fn diagnose_hitting(cfg: &ExperimentConfig) -> Result<Outcome> {
    let r = hitting_gap_diagnostic(&cfg.hitting)?;
    let mut rows = Table::new("diagnose-hitting", &["x", "delta", "prob", "std_error", "bound"]);
    for g in &r.rows {
        rows.push(vec![num(g.x), num(g.delta), num(g.prob), num(g.std_error), num(g.bound)]);
    }
    let mut first = Table::new("diagnose-hitting_first_hit", &["x", "mean_gap", "std_error", "bound"]);
    for f in &r.first_hit {
        first.push(vec![num(f.x), num(f.mean_gap), num(f.std_error), num(f.bound)]);
    }
    let checks = [
        ("zero_offset_exact", r.zero_offset_exact),
        ("nonincreasing_in_delta", r.nonincreasing_in_delta),
        ("vanishing_in_x", r.vanishing_in_x),
        ("linear_dominated", r.linear_dominated),
    ];
    Ok(Outcome::checked(&r, vec![rows, first], &checks))
}

pub fn validate(cfg: &ExperimentConfig) -> Result<Outcome> {
    let original = cfg.problem_spec()?.build()?;
    let probes = cfg.validate.probes;
    let r = validate_data(&original, probes, cfg.seed);
    let mut t = Table::new("validate", &["clause", "passed", "worst", "limit"]);
    for c in &r.clauses {
        t.push(vec![c.name.clone(), c.passed.to_string(), num(c.worst), num(c.limit)]);
    }
    let mut checks: Vec<(&str, bool)> = r.clauses.iter().map(|c| (c.name.as_str(), c.passed)).collect();
    let mut mono = None;
    if let (data, Some(tr)) = cfg.build_problem()? {
        let m = monotonicity_probes(&original, &data, tr, probes, cfg.seed);
        t.push(vec![
            "strict_decrease".into(),
            (m.worst_strict_decrease <= 1e-9).to_string(),
            num(m.worst_strict_decrease),
            "0".into(),
        ]);
        t.push(vec![
            "barrier_drive".into(),
            (m.worst_barrier_drive >= -1e-9).to_string(),
            num(m.worst_barrier_drive),
            "0".into(),
        ]);
        checks.push(("strict_decrease", m.worst_strict_decrease <= 1e-9));
        checks.push(("barrier_drive", m.worst_barrier_drive >= -1e-9));
        mono = Some(m);
    }
    Ok(Outcome::checked(json!({ "assumptions": r, "monotonicity": mono }), vec![t], &checks))
}

pub fn replay(cfg: &ExperimentConfig) -> Result<Outcome> {
    let (data, _) = cfg.build_problem()?;
    let r = frozen_replay(&data, &cfg.replay)?;
    let mut t = Table::new(
        "replay",
        &[
            "instance",
            "alpha",
            "y0",
            "std_error",
            "total_k_mass",
            "off_knot_fraction",
            "min_reflection_gap",
            "mean_knots",
        ],
    );
    t.push(vec![
        r.instance.clone(),
        num(r.alpha),
        num(r.y0),
        num(r.std_error),
        num(r.total_k_mass),
        num(r.off_knot_fraction),
        num(r.min_reflection_gap),
        num(r.mean_knots),
    ]);
    Ok(Outcome::ok(&r, vec![t]))
}
