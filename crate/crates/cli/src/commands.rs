use leafspace::condent::{additivity_counterexample, conditional_entropy_imbedded, conditional_entropy_pair};
use leafspace::experiments::{bifurcation_scan, leaf_linearity_along_scan, uniform_grid, Bracket, ScanOptions, ScanReport, Z_MAX, Z_MIN};
use leafspace::leaf::{
    gamma_sweep, leaf_from_ensemble, leaf_linearity_check, max_pairwise_first_order, pair_weight_grid, GapConvention,
    GapDirection, Leaf,
};
use leafspace::random::{random_simplex_with, stream_rng};
use leafspace::roof::entanglement_of_formation;
use leafspace::{DensityMatrix, SubalgebraSpec};
use serde_json::{json, Value};

use crate::error::CliError;
use crate::presets::{is_file, load_state, load_subalgebra, read_file};
use crate::wire::{parse_json, EnsembleJson, LeafJson, MatrixJson, RoofResultJson, SubalgebraJson};
use crate::{
    CompatArgs, CondentArgs, ConventionArg, CounterArgs, EofArgs, Format, GapDirectionArg, LeafArgs, Outcome, ScanArgs,
    StateArgs,
};
use crate::Command;

type Res<T> = Result<T, CliError>;

pub fn dispatch(cmd: &Command) -> Res<Outcome> {
    let config = cmd.config();
    match cmd {
        Command::Eof(a) => eof(a, config),
        Command::Condent(a) => condent(a, config),
        Command::ScanM3(a) => scan_m3(a, config),
        Command::Counterexample(a) => counterexample(a, config),
        Command::LeafCheck(a) => leaf_check(a, config),
        Command::Compat(a) => compat(a, config),
    }
}

fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn json_only(format: Option<Format>, command: &str) -> Res<()> {
    match format {
        None | Some(Format::Json) => Ok(()),
        Some(Format::Csv) => Err(CliError::Input(format!("{command}: only --format json is available"))),
    }
}

fn outcome(body: Value, numerical_flag: bool) -> Outcome {
    Outcome {
        body: render(&body),
        side_files: Vec::new(),
        notes: Vec::new(),
        numerical_flag,
    }
}

fn has_unconverged(flags: &[String]) -> bool {
    flags.iter().any(|f| f.ends_with("unconverged"))
}

fn state_of(input: &StateArgs) -> Res<DensityMatrix> {
    match (&input.state, &input.preset) {
        (Some(s), None) => load_state(s),
        (None, Some(p)) => load_state(p),
        (Some(_), Some(_)) => Err(CliError::Input("give either --state or --preset, not both".into())),
        (None, None) => Err(CliError::Input("a state is required: --state or --preset".into())),
    }
}

fn subalgebra_of(arg: &Option<String>, dim: usize) -> Res<SubalgebraSpec> {
    let a = match arg {
        Some(s) => load_subalgebra(s)?,
        None => SubalgebraSpec::diagonal(dim)?,
    };
    if a.ambient_dim() != dim {
        return Err(CliError::Input(format!(
            "subalgebra acts on dimension {} but the state has dimension {dim}",
            a.ambient_dim()
        )));
    }
    Ok(a)
}

fn eof(a: &EofArgs, config: Value) -> Res<Outcome> {
    json_only(a.out.format, "eof")?;
    let rho = state_of(&a.input)?;
    let sub = subalgebra_of(&a.input.subalg, rho.dim())?;
    let res = entanglement_of_formation(&rho, &sub, &a.opt.roof_options())?;
    let mut body = serde_json::to_value(RoofResultJson::from_result(&res)).expect("serializes");
    body["subalgebra"] = serde_json::to_value(SubalgebraJson::from_spec(&sub)).expect("serializes");
    body["config"] = config;
    Ok(outcome(body, has_unconverged(&res.flags)))
}

fn condent(a: &CondentArgs, config: Value) -> Res<Outcome> {
    json_only(a.out.format, "condent")?;
    let rho = state_of(&a.input)?;
    let sub_a = subalgebra_of(&a.input.subalg, rho.dim())?;
    let opts = a.opt.roof_options();
    match &a.subalg_b {
        None => {
            let r = conditional_entropy_imbedded(&rho, &sub_a, &opts)?;
            let stability = r.stability.as_ref().map(|s| {
                json!({
                    "first_order_max": s.first_order_max,
                    "min_second_order": s.min_second_order,
                    "directions": s.directions,
                    "unstable": s.unstable,
                })
            });
            let body = json!({
                "mode": "imbedded",
                "value": r.value,
                "entropy": r.entropy,
                "restricted_entropy": r.restricted_entropy,
                "flags": r.flags,
                "stability": stability,
                "roof": RoofResultJson::from_result(&r.roof),
                "config": config,
            });
            Ok(outcome(body, has_unconverged(&r.flags)))
        }
        Some(b) => {
            let sub_b = subalgebra_of(&Some(b.clone()), rho.dim())?;
            let r = conditional_entropy_pair(&rho, &sub_b, &sub_a, &opts)?;
            let body = json!({
                "mode": "pair",
                "value": r.value,
                "restarts_agreeing": r.restarts_agreeing,
                "converged": r.converged,
                "restart_values": r.restart_values,
                "flags": r.flags,
                "povm": {
                    "weights": r.povm.weights(),
                    "elements": r.povm.elements().iter().map(MatrixJson::from_matrix).collect::<Vec<_>>(),
                },
                "config": config,
            });
            Ok(outcome(body, has_unconverged(&r.flags)))
        }
    }
}

fn bracket_json(b: &Option<Bracket>) -> Value {
    match b {
        Some(b) => json!({"lo": b.lo, "hi": b.hi}),
        None => Value::Null,
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| format!("{v:?}")).unwrap_or_default()
}

/// Rows in the exact column order `z, E_direct, E_orbit1, E_two_orbit, mu,
/// best_label, residual, flags, runtime_ms`.
pub fn scan_csv(report: &ScanReport) -> Res<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Input(e.to_string());
    w.write_record(["z", "E_direct", "E_orbit1", "E_two_orbit", "mu", "best_label", "residual", "flags", "runtime_ms"])
        .map_err(io)?;
    for p in &report.points {
        w.write_record([
            format!("{:?}", p.z),
            format!("{:?}", p.e_direct),
            opt_num(p.e_orbit1),
            opt_num(p.e_two_orbit),
            opt_num(p.mu),
            p.best_label.clone(),
            format!("{:?}", p.residual),
            p.flags.join(";"),
            opt_num(p.runtime_ms),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn scan_footer(report: &ScanReport, mu_threshold: f64, config: &Value) -> Value {
    let lin = leaf_linearity_along_scan(report, mu_threshold);
    let applicable: Vec<Value> = lin
        .iter()
        .filter_map(|r| r.gap.map(|g| json!({"z": r.z, "mu": r.mu, "gap": g})))
        .collect();
    let max_gap = lin.iter().filter_map(|r| r.gap).fold(0.0, f64::max);
    let d = &report.detected;
    json!({
        "seed": report.seed,
        "rows": report.points.len(),
        "detected": {
            "z0": bracket_json(&d.z0),
            "z0_stability": bracket_json(&d.z0_stability),
            "z1": bracket_json(&d.z1),
            "z1_candidate": d.z1_candidate,
            "lipschitz": d.lipschitz,
        },
        "linearity": applicable,
        "max_linearity_gap": max_gap,
        "config": config,
    })
}

fn scan_m3(a: &ScanArgs, config: Value) -> Res<Outcome> {
    if !(a.z_min >= Z_MIN - 1e-12 && a.z_max <= Z_MAX + 1e-12 && a.z_min <= a.z_max) {
        return Err(CliError::Input(format!(
            "scan range [{}, {}] must lie inside −1/6 ≤ z ≤ 1/3",
            a.z_min, a.z_max
        )));
    }
    if a.steps == 0 {
        return Err(CliError::Input("--steps must be positive".into()));
    }
    let grid: Vec<f64> = if a.steps == 1 {
        vec![a.z_min]
    } else {
        uniform_grid(a.steps)
            .iter()
            .map(|u| a.z_min + (a.z_max - a.z_min) * (u - Z_MIN) / (Z_MAX - Z_MIN))
            .collect()
    };
    let opts = ScanOptions {
        roof: a.opt.roof_options(),
        timing: a.timing,
        ..ScanOptions::default()
    };
    let report = bifurcation_scan(&grid, &opts)?;
    let flagged = report
        .points
        .iter()
        .any(|p| has_unconverged(&p.flags) || p.flags.iter().any(|f| f.starts_with("error")));
    let footer = scan_footer(&report, opts.mu_threshold, &config);
    match a.out.format.unwrap_or(Format::Csv) {
        Format::Csv => Ok(Outcome {
            body: scan_csv(&report)?,
            side_files: vec![(".footer.json".into(), render(&footer))],
            notes: Vec::new(),
            numerical_flag: flagged,
        }),
        Format::Json => {
            let mut body = footer;
            body["points"] = report
                .points
                .iter()
                .map(|p| {
                    json!({
                        "z": p.z, "E_direct": p.e_direct, "E_orbit1": p.e_orbit1, "E_two_orbit": p.e_two_orbit,
                        "mu": p.mu, "best_label": p.best_label, "residual": p.residual, "flags": p.flags,
                        "runtime_ms": p.runtime_ms,
                    })
                })
                .collect();
            Ok(outcome(body, flagged))
        }
    }
}

fn counterexample(a: &CounterArgs, config: Value) -> Res<Outcome> {
    json_only(a.out.format, "counterexample")?;
    if !(2..=3).contains(&a.n) {
        return Err(CliError::Input(format!("counterexample: unsupported size n = {} (use 2 or 3)", a.n)));
    }
    let r = additivity_counterexample(a.n, &a.opt.roof_options())?;
    let body = json!({
        "n": r.n,
        "H_full": r.h_full,
        "H_AB": r.h_ab,
        "H_CC": r.h_cc,
        "paper_H_AB": r.published_h_ab,
        "nonadditive": r.nonadditive,
        "margin": r.margin,
        "witness_value": r.witness_value,
        "witness_bound": r.witness_bound,
        "flags": r.flags,
        "config": config,
    });
    let mut o = outcome(body, has_unconverged(&r.flags));
    if a.n == 3 {
        o.notes.push("warning: n = 3 optimizes over 27-dimensional states and runs long".into());
    }
    Ok(o)
}

/// Leaf from a leaf, ensemble or state file, or from the optimal
/// decomposition of a state preset.
fn leaf_of(input: &StateArgs, a: &crate::OptArgs) -> Res<Leaf> {
    let file = match (&input.state, &input.preset) {
        (Some(s), None) if is_file(s) => Some(s.clone()),
        _ => None,
    };
    if let Some(path) = file {
        let text = read_file(&path)?;
        let v: Value = parse_json(&text, &path)?;
        if v.get("extremals").is_some() {
            let l: LeafJson = parse_json(&text, &path)?;
            return l.to_leaf();
        }
        if v.get("weights").is_some() {
            let e: EnsembleJson = parse_json(&text, &path)?;
            let ens = e.to_ensemble()?;
            let sub = subalgebra_of(&input.subalg, ens.target().dim())?;
            let vs = ens
                .pure_vectors()
                .ok_or_else(|| CliError::Input(format!("{path}: ensemble needs pure_vectors")))?;
            return Ok(Leaf::new(vs.to_vec(), &sub)?);
        }
    }
    let rho = state_of(input)?;
    let sub = subalgebra_of(&input.subalg, rho.dim())?;
    let res = entanglement_of_formation(&rho, &sub, &a.roof_options())?;
    Ok(leaf_from_ensemble(&res, &sub)?)
}

fn weight_grid(k: usize, steps: usize, seed: u64) -> Vec<Vec<f64>> {
    match k {
        1 => vec![vec![1.0]],
        2 => pair_weight_grid(steps),
        _ => {
            let mut grid: Vec<Vec<f64>> = (0..k)
                .map(|i| (0..k).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect();
            grid.push(vec![1.0 / k as f64; k]);
            let mut rng = stream_rng(seed, 0x1eaf);
            for _ in 0..steps {
                grid.push(random_simplex_with(&mut rng, k));
            }
            grid
        }
    }
}

fn leaf_check(a: &LeafArgs, config: Value) -> Res<Outcome> {
    json_only(a.out.format, "leaf-check")?;
    let leaf = leaf_of(&a.input, &a.opt)?;
    let grid = weight_grid(leaf.len(), a.steps, a.opt.seed);
    let rep = leaf_linearity_check(&leaf, &grid, &a.opt.roof_options())?;
    let unconverged = rep.points.iter().any(|p| !p.converged);
    let body = json!({
        "max_gap": rep.max_gap,
        "points": rep.points.iter().map(|p| json!({
            "weights": p.weights, "value": p.value, "linear": p.linear, "gap": p.gap, "converged": p.converged,
        })).collect::<Vec<_>>(),
        "leaf": LeafJson::from_leaf(&leaf),
        "config": config,
    });
    Ok(outcome(body, unconverged))
}

fn compat(a: &CompatArgs, config: Value) -> Res<Outcome> {
    json_only(a.out.format, "compat")?;
    let leaf = leaf_of(&a.input, &a.opt)?;
    let convention = match a.convention {
        ConventionArg::Validated => GapConvention::Validated,
        ConventionArg::Literal => GapConvention::Literal,
    };
    let direction = match a.direction {
        GapDirectionArg::Entanglement => GapDirection::Entanglement,
        GapDirectionArg::Conditional => GapDirection::Conditional,
    };
    let reports = gamma_sweep(leaf.extremals(), leaf.subalgebra(), a.steps, a.opt.seed, direction, convention)?;
    let first_order = max_pairwise_first_order(leaf.extremals(), leaf.subalgebra())?;
    let min_gap = reports.iter().map(|r| r.gap).fold(f64::INFINITY, f64::min);
    let body = json!({
        "count": reports.len(),
        "min_gap": if reports.is_empty() { Value::Null } else { json!(min_gap) },
        "first_order_max": first_order,
        "samples": {
            "lhs": reports.iter().map(|r| r.lhs).collect::<Vec<_>>(),
            "rhs": reports.iter().map(|r| r.rhs).collect::<Vec<_>>(),
            "gap": reports.iter().map(|r| r.gap).collect::<Vec<_>>(),
            "off_support_mass": reports.iter().map(|r| r.off_support_mass).collect::<Vec<_>>(),
        },
        "leaf": LeafJson::from_leaf(&leaf),
        "config": config,
    });
    Ok(outcome(body, false))
}
