//! Pipeline orchestration: classify → minimize → indicators → curvature → probe → commutator.

use super::config::{ScenarioConfig, Task};
use super::report::{CommutatorSummary, MinimizeSummary, ProbeSummary, RunOutcome, RunReport, Status, TaskStatus};
use crate::curvature::{leading_fit, Component};
use crate::fields::{parse_expression, FieldExpr, Grid2, ScalarGridField, SymField3, VectorGridField2};
use crate::gamma::{assemble, EnergyFunctional, MinimizeOptions, MinimizeResult};
use crate::probe::{build_recovery, commutator_scaling, scaling_fit, Deformation3D, Ingredient, Quadrature, Variant};
use crate::regimes::{classify, optimality_indicators, RegimeSpec, TheoremCase};
use crate::tolerances::VANISHING_ENERGY;
use std::collections::BTreeMap;
use std::time::Instant;

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    statuses: Vec<TaskStatus>,
    timings: BTreeMap<String, f64>,
}

impl Ctx<'_> {
    fn record(&mut self, task: Task, status: Status, message: Option<String>, started: Option<Instant>) {
        let implicit = !self.cfg.has(task);
        self.statuses.push(TaskStatus { task: task.name().into(), status, implicit, message });
        if let Some(t) = started {
            self.timings.insert(task.name().into(), t.elapsed().as_secs_f64());
        }
    }
}

/// Variant used by the probe: explicit choice, else the case's own construction.
fn probe_variant(cfg: &ScenarioConfig, spec: &RegimeSpec) -> Result<Variant, String> {
    if let Some(v) = cfg.probe.variant {
        return Ok(v);
    }
    match spec.theorem_case {
        TheoremCase::ScalingOnly => Ok(Variant::Recseq0),
        c => Variant::for_case(c).ok_or_else(|| format!("case {c} has no recovery construction")),
    }
}

fn probe_uses_minimizer(cfg: &ScenarioConfig, spec: &RegimeSpec) -> bool {
    cfg.probe.v.is_none() && matches!(probe_variant(cfg, spec), Ok(Variant::Recseq | Variant::Recseq5))
}

fn expr_or_zero(src: &Option<String>) -> FieldExpr {
    src.as_deref().map(|s| parse_expression(s).expect("validated expression")).unwrap_or_else(|| FieldExpr::constant(0.0))
}

pub fn run(cfg: &ScenarioConfig) -> RunOutcome {
    let mut ctx = Ctx { cfg, statuses: Vec::new(), timings: BTreeMap::new() };
    let grid = cfg.grid();
    let material = cfg.material();

    let need_classify = [Task::Classify, Task::Minimize, Task::Indicators, Task::Probe].iter().any(|&t| cfg.has(t));
    let mut sampled: Option<(SymField3, SymField3)> = None;
    let mut spec: Option<RegimeSpec> = None;
    if need_classify {
        let t = Instant::now();
        let res = (|| -> Result<_, String> {
            let sf = cfg.s.sample(&grid).map_err(|e| format!("sampling S: {e}"))?;
            let bf = cfg.b.sample(&grid).map_err(|e| format!("sampling B: {e}"))?;
            let sp = classify(cfg.alpha, cfg.gamma, &sf, &bf, cfg.s22_zero).map_err(|e| e.to_string())?;
            Ok((sf, bf, sp))
        })();
        match res {
            Ok((sf, bf, sp)) => {
                sampled = Some((sf, bf));
                spec = Some(sp);
                ctx.record(Task::Classify, Status::Ok, None, Some(t));
            }
            Err(m) => ctx.record(Task::Classify, Status::Failed, Some(m), Some(t)),
        }
    }
    let dep_failed = |ctx: &mut Ctx, task: Task| {
        ctx.record(task, Status::Skipped, Some("classification unavailable".into()), None);
    };

    // minimize
    let mut functional: Option<EnergyFunctional> = None;
    let mut minimum: Option<MinimizeResult> = None;
    let need_min = cfg.has(Task::Minimize) || (cfg.has(Task::Probe) && spec.as_ref().is_some_and(|s| probe_uses_minimizer(cfg, s)));
    if need_min {
        match (&spec, &sampled) {
            (Some(sp), Some((sf, bf))) if sp.theorem_case.has_limit() => {
                let t = Instant::now();
                match assemble(sp, sf, bf, &material) {
                    Ok(e) => {
                        let opts = MinimizeOptions {
                            max_iter: cfg.minimize.max_iter,
                            tol: cfg.minimize.tol,
                            memory: cfg.minimize.memory,
                            random_starts: cfg.minimize.random_starts,
                            seed: cfg.seed,
                        };
                        minimum = Some(e.minimize(&opts));
                        functional = Some(e);
                        ctx.record(Task::Minimize, Status::Ok, None, Some(t));
                    }
                    Err(e) => ctx.record(Task::Minimize, Status::Failed, Some(e.to_string()), Some(t)),
                }
            }
            (Some(sp), _) => {
                ctx.record(Task::Minimize, Status::Skipped, Some(format!("case {} has no plate limit", sp.theorem_case)), None)
            }
            _ => dep_failed(&mut ctx, Task::Minimize),
        }
    }

    // indicators
    let mut indicators = None;
    if cfg.has(Task::Indicators) {
        match (&spec, &sampled) {
            (Some(sp), Some((sf, bf))) if sp.theorem_case.has_limit() => {
                let t = Instant::now();
                match optimality_indicators(sf, bf, sp) {
                    Ok(r) => {
                        indicators = Some(r);
                        ctx.record(Task::Indicators, Status::Ok, None, Some(t));
                    }
                    Err(e) => ctx.record(Task::Indicators, Status::Failed, Some(e.to_string()), Some(t)),
                }
            }
            (Some(sp), _) => ctx.record(
                Task::Indicators,
                Status::Skipped,
                Some(format!("case {} has no optimality indicators", sp.theorem_case)),
                None,
            ),
            _ => dep_failed(&mut ctx, Task::Indicators),
        }
    }

    // curvature
    let mut curvature = None;
    if cfg.has(Task::Curvature) {
        let t = Instant::now();
        let res: Result<Vec<_>, String> = cfg
            .curvature
            .components
            .iter()
            .map(|c| {
                let comp: Component = c.parse().map_err(|e: crate::curvature::CurvatureError| e.to_string())?;
                leading_fit(&cfg.s, &cfg.b, cfg.alpha, cfg.gamma, comp, cfg.curvature.point, &cfg.curvature.sweep)
                    .map_err(|e| e.to_string())
            })
            .collect();
        match res {
            Ok(f) => {
                curvature = Some(f);
                ctx.record(Task::Curvature, Status::Ok, None, Some(t));
            }
            Err(m) => ctx.record(Task::Curvature, Status::Failed, Some(m), Some(t)),
        }
    }

    // probe
    let mut probe = None;
    if cfg.has(Task::Probe) {
        match &spec {
            None => dep_failed(&mut ctx, Task::Probe),
            Some(sp) => {
                let t = Instant::now();
                match run_probe(cfg, sp, &grid, &material, sampled.as_ref(), functional.as_ref(), minimum.as_ref()) {
                    Ok(p) => {
                        probe = Some(p);
                        ctx.record(Task::Probe, Status::Ok, None, Some(t));
                    }
                    Err(ProbeFailure::Skip(m)) => ctx.record(Task::Probe, Status::Skipped, Some(m), None),
                    Err(ProbeFailure::Fail(m)) => ctx.record(Task::Probe, Status::Failed, Some(m), Some(t)),
                }
            }
        }
    }

    // commutator
    let mut commutator = None;
    if cfg.has(Task::Commutator) {
        let t = Instant::now();
        let c = &cfg.commutator;
        let res = (|| -> Result<_, String> {
            let v = parse_expression(&format!("weier({}, {}, {})", 1.0 + c.a, c.base, c.terms)).map_err(|e| e.to_string())?;
            let [x0, x1, y0, y1] = cfg.domain;
            let g = Grid2::new(x0, x1, y0, y1, c.grid, c.grid).map_err(|e| e.to_string())?;
            commutator_scaling(&v, &g, &c.epsilon).map_err(|e| e.to_string())
        })();
        match res {
            Ok(report) => {
                commutator =
                    Some(CommutatorSummary { label: "machinery-only".into(), a: c.a, required_exponent: 2.0 * c.a - 0.1, report });
                ctx.record(Task::Commutator, Status::Ok, None, Some(t));
            }
            Err(m) => ctx.record(Task::Commutator, Status::Failed, Some(m), Some(t)),
        }
    }

    let partial = ctx.statuses.iter().any(|s| s.status == Status::Failed);
    let report = RunReport {
        version: env!("CARGO_PKG_VERSION").into(),
        scenario: cfg.name.clone(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        partial,
        tasks: ctx.statuses,
        regime: spec,
        minimize: minimum.as_ref().map(|r| MinimizeSummary {
            value: r.value,
            bending: r.bending,
            stretching: r.stretching,
            iterations: r.iterations,
            converged: r.converged,
            gradient_measure: r.gradient_measure,
            starts: r.starts.clone(),
            distinct_minima: r.distinct_minima.clone(),
        }),
        indicators,
        curvature,
        probe,
        commutator,
    };
    RunOutcome { report, v: minimum.as_ref().map(|r| r.v.clone()), w: minimum.map(|r| r.w), timings: ctx.timings }
}

enum ProbeFailure {
    Skip(String),
    Fail(String),
}

fn run_probe(
    cfg: &ScenarioConfig,
    spec: &RegimeSpec,
    grid: &Grid2,
    material: &crate::elastic::Material,
    sampled: Option<&(SymField3, SymField3)>,
    functional: Option<&EnergyFunctional>,
    minimum: Option<&MinimizeResult>,
) -> Result<ProbeSummary, ProbeFailure> {
    let variant = probe_variant(cfg, spec).map_err(ProbeFailure::Skip)?;
    let delta = match variant {
        Variant::Recseq0 => cfg.alpha / 2.0,
        _ => spec.delta.ok_or_else(|| ProbeFailure::Skip(format!("case {} has no δ for {}", spec.theorem_case, variant.label())))?,
    };
    let uses_min = probe_uses_minimizer(cfg, spec);
    let (v, w, vw_grid): (Ingredient, [Ingredient; 2], Option<(ScalarGridField, VectorGridField2)>) = if uses_min {
        let m = minimum.ok_or_else(|| ProbeFailure::Fail("minimizer unavailable".into()))?;
        (
            Ingredient::from_grid(&m.v),
            [Ingredient::from_grid(&m.w.component(0)), Ingredient::from_grid(&m.w.component(1))],
            Some((m.v.clone(), m.w.clone())),
        )
    } else {
        let v = expr_or_zero(&cfg.probe.v);
        let w = [expr_or_zero(&cfg.probe.w[0]), expr_or_zero(&cfg.probe.w[1])];
        let sampled_vw = (|| {
            let vg = ScalarGridField::sample(&v, grid).ok()?;
            let wg = VectorGridField2::sample(&w, grid).ok()?;
            Some((vg, wg))
        })();
        (v.into(), w.map(Ingredient::from), sampled_vw)
    };
    let u: Deformation3D = build_recovery(variant, v, w, &cfg.s, &cfg.b, cfg.alpha, cfg.gamma, delta, material)
        .map_err(|e| ProbeFailure::Fail(e.to_string()))?;
    let predicted = match variant {
        Variant::Recseq0 => (2.0 + cfg.alpha / 2.0).min(2.0 + cfg.gamma).min(2.0 * cfg.alpha),
        _ => 2.0 + delta,
    };
    let [x0, x1, y0, y1] = cfg.domain;
    let qgrid = Grid2::new(x0, x1, y0, y1, cfg.probe.quad_grid, cfg.probe.quad_grid).map_err(|e| ProbeFailure::Fail(e.to_string()))?;
    let scaling = scaling_fit(&u, &cfg.h_sweep, material, &Quadrature::standard(qgrid), predicted)
        .map_err(|e| ProbeFailure::Fail(e.to_string()))?;

    let mut limit_value = None;
    if variant != Variant::Recseq0 && spec.theorem_case.has_limit() {
        let assembled;
        let e = match functional {
            Some(e) => Some(e),
            None => {
                assembled = sampled.and_then(|(sf, bf)| assemble(spec, sf, bf, material).ok());
                assembled.as_ref()
            }
        };
        if let (Some(e), Some((vg, wg))) = (e, &vw_grid) {
            limit_value = Some(e.evaluate(vg, wg).value);
        }
    }
    let limit_ratio = if variant != Variant::Recseq0 {
        (0..scaling.h.len()).rev().find(|&k| scaling.energies[k] > 1e3 * scaling.floors[k]).map(|k| scaling.ratios[k])
    } else {
        None
    };
    let relative_gap = match (limit_value, limit_ratio) {
        (Some(l), Some(r)) if l > VANISHING_ENERGY => Some((r - l).abs() / l),
        _ => None,
    };
    Ok(ProbeSummary { scaling, limit_value, limit_ratio, relative_gap })
}
