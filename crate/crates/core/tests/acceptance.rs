//! Acceptance suite. Runs every criterion in `configs/acceptance/manifest.toml`
//! and prints one status line per criterion.
//!
//! `cargo test --test acceptance -- 3 7` runs only criteria 3 and 7 (and 11
//! over whatever ran).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use hetqp::cli::{generate_splits, prepare_classes, warmstart_pairs, ExperimentConfig};
use hetqp::dataset::Instance;
use hetqp::decoding::decode;
use hetqp::graphs::{generate_er, Graph};
use hetqp::loss::{loss_and_grad, loss_grad_xr, penalty, relaxed_loss, LossConfig};
use hetqp::metrics::evaluate;
use hetqp::model::{forward, gradient, init_model, l2_norm, ModelConfig, ModelParams};
use hetqp::oracle::{branch_and_bound, brute_force, BranchAndBoundAdapter, OracleCache};
use hetqp::problems::{BinaryAssignment, ProblemClass, Sense};
use hetqp::repro::{run_manifest, Metrics, ReproManifest};
use hetqp::training::{batch_gradient, dynamic_weights, finetune, train_multi, train_single, TrainConfig, TrainMode, Trainer};
use hetqp::{Error, Result};

const IDS: [&str; 11] = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11"];

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(toml::from_str(&std::fs::read_to_string(path)?)?)
}

fn metrics(pairs: &[(&str, f64)]) -> Metrics {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn random_graph(rng: &mut ChaCha8Rng, n_min: usize, n_max: usize) -> Result<Graph> {
    let n = rng.gen_range(n_min..=n_max);
    let p = rng.gen_range(0.05..0.95);
    generate_er(n, p, rng.gen())
}

fn class_name(c: ProblemClass) -> String {
    c.to_string().to_lowercase()
}

// Graph-level references, computed without the QP encoding.

fn set_size(s: &[bool]) -> usize {
    s.iter().filter(|&&b| b).count()
}

fn closed_hits(g: &Graph, s: &[bool], v: usize) -> usize {
    usize::from(s[v]) + g.neighbors(v).iter().filter(|&&u| s[u]).count()
}

/// Total violation of the class's constraints on the graph.
fn reference_violation(cls: ProblemClass, g: &Graph, s: &[bool]) -> f64 {
    let n = g.num_nodes();
    let count = match cls {
        ProblemClass::Mis => g.edges().iter().filter(|&&(u, v)| s[u] && s[v]).count(),
        ProblemClass::Mc => (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| s[u] && s[v] && !g.has_edge(u, v))
            .count(),
        ProblemClass::Mvc => g.edges().iter().filter(|&&(u, v)| !s[u] && !s[v]).count(),
        ProblemClass::Mds => (0..n).filter(|&v| closed_hits(g, s, v) == 0).count(),
    };
    count as f64
}

/// Canonical minimization objective: `−|S|` for the maximization classes.
fn reference_objective(cls: ProblemClass, s: &[bool]) -> f64 {
    match cls.sense() {
        Sense::Max => -(set_size(s) as f64),
        Sense::Min => set_size(s) as f64,
    }
}

fn bits(mask: u64, n: usize) -> Vec<bool> {
    (0..n).map(|i| mask >> i & 1 == 1).collect()
}

fn as_f64(s: &[bool]) -> Vec<f64> {
    s.iter().map(|&b| f64::from(u8::from(b))).collect()
}

/// Maximal for MIS/MC, minimal for MVC/MDS.
fn reference_extremal(cls: ProblemClass, g: &Graph, s: &[bool]) -> bool {
    let n = g.num_nodes();
    let feasible_with = |t: &[bool]| reference_violation(cls, g, t) == 0.0;
    (0..n).all(|v| {
        let mut t = s.to_vec();
        match cls {
            ProblemClass::Mis | ProblemClass::Mc if !s[v] => {
                t[v] = true;
                !feasible_with(&t)
            }
            ProblemClass::Mvc | ProblemClass::Mds if s[v] => {
                t[v] = false;
                !feasible_with(&t)
            }
            _ => true,
        }
    })
}

#[derive(Deserialize)]
struct ExhaustiveCfg {
    #[serde(alias = "graphs")]
    instances_per_class: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
}

fn c01_binary_exactness(path: &Path) -> Result<Metrics> {
    let cfg: ExhaustiveCfg = read_config(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let loss = LossConfig { lambda_obj: 1.0, lambda_constr: 1.0 };
    let mut worst: f64 = 0.0;
    let mut points = 0usize;
    for cls in ProblemClass::ALL {
        for k in 0..cfg.instances_per_class {
            let g = random_graph(&mut rng, cfg.n_min, cfg.n_max)?;
            let inst = Instance::new(format!("{cls}-{k}"), g, cls)?;
            let n = inst.graph.num_nodes();
            for mask in 0..1u64 << n {
                let s = bits(mask, n);
                let expect = reference_objective(cls, &s) + reference_violation(cls, &inst.graph, &s);
                let got = relaxed_loss(&inst.hetero, &as_f64(&s), &loss)?;
                worst = worst.max((got - expect).abs());
                points += 1;
            }
        }
    }
    Ok(metrics(&[("max_abs_error", worst), ("binary_points", points as f64)]))
}

fn c02_infeasibility_floor(path: &Path) -> Result<Metrics> {
    let cfg: ExhaustiveCfg = read_config(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut min_pen = f64::INFINITY;
    let mut mismatches = 0usize;
    let mut infeasible = 0usize;
    for k in 0..cfg.instances_per_class {
        let g = random_graph(&mut rng, cfg.n_min, cfg.n_max)?;
        for cls in ProblemClass::ALL {
            let inst = Instance::new(format!("{cls}-{k}"), g.clone(), cls)?;
            let n = g.num_nodes();
            for mask in 0..1u64 << n {
                let s = bits(mask, n);
                let pen = penalty(&inst.hetero, &as_f64(&s))?;
                let is_infeasible = reference_violation(cls, &g, &s) > 0.0;
                let qp_feasible = inst.qp.is_feasible(&BinaryAssignment::new(s.clone()))?.feasible;
                if is_infeasible == qp_feasible || is_infeasible != (pen > 0.0) {
                    mismatches += 1;
                }
                if is_infeasible {
                    infeasible += 1;
                    min_pen = min_pen.min(pen);
                }
            }
        }
    }
    Ok(metrics(&[
        ("min_infeasible_penalty", min_pen),
        ("feasibility_mismatches", mismatches as f64),
        ("infeasible_points", infeasible as f64),
    ]))
}

#[derive(Deserialize)]
struct DecoderCfg {
    pairs_per_class: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
}

fn c03_decoders(path: &Path) -> Result<Metrics> {
    let cfg: DecoderCfg = read_config(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut infeasible, mut not_extremal, mut pairs) = (0usize, 0usize, 0usize);
    for cls in ProblemClass::ALL {
        for k in 0..cfg.pairs_per_class {
            let g = random_graph(&mut rng, cfg.n_min, cfg.n_max)?;
            let n = g.num_nodes();
            // Every third vector is coarsely quantized so ties occur.
            let x: Vec<f64> = (0..n)
                .map(|_| if k % 3 == 0 { f64::from(rng.gen_range(0..3u8)) / 2.0 } else { rng.gen::<f64>() })
                .collect();
            let sol = decode(cls, &g, &x)?;
            let s = sol.assignment().bits().to_vec();
            if reference_violation(cls, &g, &s) != 0.0 || sol.objective != set_size(&s) as f64 {
                infeasible += 1;
            } else if !reference_extremal(cls, &g, &s) {
                not_extremal += 1;
            }
            pairs += 1;
        }
    }
    Ok(metrics(&[
        ("infeasible", infeasible as f64),
        ("not_extremal", not_extremal as f64),
        ("pairs", pairs as f64),
    ]))
}

#[derive(Deserialize)]
struct OracleCfg {
    instances_per_class: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
    time_limit: f64,
}

fn c04_oracle(path: &Path) -> Result<Metrics> {
    let cfg: OracleCfg = read_config(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut mismatches, mut unproven, mut nodes) = (0usize, 0usize, 0u64);
    for cls in ProblemClass::ALL {
        for k in 0..cfg.instances_per_class {
            let g = random_graph(&mut rng, cfg.n_min, cfg.n_max)?;
            let inst = Instance::new(format!("{cls}-{k}"), g, cls)?;
            let exact = brute_force(&inst.qp)?;
            let bnb = branch_and_bound(&inst.qp, cfg.time_limit)?;
            let s = bnb.x_star.bits().to_vec();
            let attained = reference_objective(cls, &s) == bnb.value_internal
                && reference_violation(cls, &inst.graph, &s) == 0.0;
            if bnb.value_internal != exact.value_internal || !attained {
                mismatches += 1;
            }
            unproven += usize::from(!bnb.proven_optimal);
            nodes += bnb.nodes_explored;
        }
    }
    Ok(metrics(&[
        ("value_mismatches", mismatches as f64),
        ("unproven", unproven as f64),
        ("bnb_nodes", nodes as f64),
    ]))
}

#[derive(Deserialize)]
struct GradientCfg {
    points: usize,
    n_min: usize,
    n_max: usize,
    seed: u64,
    hinge_margin: f64,
    xr_step: f64,
    param_step: f64,
    params_per_point: usize,
    jitter: f64,
    #[serde(default)]
    model: ModelConfig,
}

/// Smallest distance of any constraint row from its hinge.
fn hinge_margin(inst: &Instance, x: &[f64]) -> f64 {
    let ax = inst.qp.a().mul_vec(x);
    ax.iter().zip(inst.qp.b()).map(|(a, b)| (a - b).abs()).fold(f64::INFINITY, f64::min)
}

fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(0.0, f64::max);
    let err = analytic.iter().zip(numeric).map(|(a, f)| (a - f).abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        err
    } else {
        err / scale
    }
}

fn c05_gradients(path: &Path) -> Result<Metrics> {
    let cfg: GradientCfg = read_config(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut err_x, mut err_p) = (0.0f64, 0.0f64);
    let mut points = 0usize;
    while points < cfg.points {
        let cls = ProblemClass::ALL[points % 4];
        let g = random_graph(&mut rng, cfg.n_min, cfg.n_max)?;
        let inst = Instance::new(format!("p{points}"), g, cls)?;
        let loss = LossConfig { lambda_obj: rng.gen_range(0.5..2.0), lambda_constr: rng.gen_range(0.5..2.0) };
        let h = &inst.hetero;
        let n = h.num_var;

        // Relaxed-solution gradient at a random interior point.
        let x: Vec<f64> = loop {
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..0.95)).collect();
            if inst.qp.num_constraints() == 0 || hinge_margin(&inst, &x) > cfg.hinge_margin {
                break x;
            }
        };
        let analytic = loss_grad_xr(h, &x, &loss)?;
        let mut numeric = vec![0.0; n];
        for i in 0..n {
            let (mut up, mut dn) = (x.clone(), x.clone());
            up[i] += cfg.xr_step;
            dn[i] -= cfg.xr_step;
            numeric[i] = (relaxed_loss(h, &up, &loss)? - relaxed_loss(h, &dn, &loss)?) / (2.0 * cfg.xr_step);
        }
        err_x = err_x.max(max_rel_error(&analytic, &numeric));

        // End-to-end parameter gradient where the model output is interior.
        let model_cfg = ModelConfig { seed: rng.gen(), ..cfg.model };
        let mut params = init_model(&model_cfg)?;
        let out = loop {
            for p in params.flat_mut() {
                *p += rng.gen_range(-cfg.jitter..cfg.jitter);
            }
            let out = forward(&params, h)?;
            let interior = out.values().iter().all(|&v| v > 1e-9 && v < 1.0 - 1e-9);
            if interior && (inst.qp.num_constraints() == 0 || hinge_margin(&inst, out.values()) > cfg.hinge_margin) {
                break out;
            }
        };
        debug_assert_eq!(out.values().len(), n);
        let grad = gradient(&params, h, |x| loss_and_grad(h, x, &loss))?.grad;
        let top = (0..grad.len()).max_by(|&a, &b| grad[a].abs().total_cmp(&grad[b].abs())).unwrap_or(0);
        let mut picks = vec![top];
        picks.extend((1..cfg.params_per_point).map(|_| rng.gen_range(0..grad.len())));
        let eval = |p: &ModelParams| -> Result<f64> { relaxed_loss(h, forward(p, h)?.values(), &loss) };
        let mut a = Vec::with_capacity(picks.len());
        let mut f = Vec::with_capacity(picks.len());
        for &k in &picks {
            let (mut up, mut dn) = (params.clone(), params.clone());
            up.flat_mut()[k] += cfg.param_step;
            dn.flat_mut()[k] -= cfg.param_step;
            a.push(grad[k]);
            f.push((eval(&up)? - eval(&dn)?) / (2.0 * cfg.param_step));
        }
        err_p = err_p.max(max_rel_error(&a, &f));
        points += 1;
    }
    Ok(metrics(&[("max_rel_error_xr", err_x), ("max_rel_error_params", err_p), ("points", points as f64)]))
}

#[derive(Deserialize)]
struct WithExperiment {
    experiment: ExperimentConfig,
    #[serde(default)]
    classes: Vec<ProblemClass>,
    #[serde(default)]
    single: Option<TrainConfig>,
    #[serde(default)]
    random_vectors: usize,
    #[serde(default)]
    live_steps: usize,
    #[serde(default)]
    seed: u64,
}

fn load_experiment(path: &Path) -> Result<WithExperiment> {
    let c: WithExperiment = read_config(path)?;
    c.experiment.validate()?;
    Ok(c)
}

fn identity_error(norms: &[f64], weights: &[f64], eps: f64) -> f64 {
    let mean = norms.iter().sum::<f64>() / norms.len() as f64;
    norms.iter().zip(weights).map(|(g, w)| (w * (g + eps) - mean).abs() / mean).fold(0.0, f64::max)
}

fn c06_dynamic_weights(path: &Path) -> Result<Metrics> {
    let c = load_experiment(path)?;
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let eps = c.experiment.train.epsilon_dw;
    let mut err_random: f64 = 0.0;
    for _ in 0..c.random_vectors {
        let k = rng.gen_range(2..=8);
        let norms: Vec<f64> = (0..k).map(|_| 10f64.powf(rng.gen_range(-3.0..3.0))).collect();
        err_random = err_random.max(identity_error(&norms, &dynamic_weights(&norms, eps), eps));
    }

    let exp = &c.experiment;
    let splits = generate_splits(&exp.dataset)?;
    let data = prepare_classes(&splits, &exp.classes, &mut OracleCache::in_memory())?;
    let mut trainer = Trainer::new(init_model(&exp.model)?, &data, exp.train)?;
    let schedule = trainer.epoch_batches();
    let mut err_live: f64 = 0.0;
    for t in 0..c.live_steps {
        let batches = &schedule[t % schedule.len()];
        let norms: Vec<f64> = data
            .iter()
            .zip(batches)
            .map(|(d, idx)| {
                let members: Vec<&Instance> = idx.iter().map(|&i| &d.train[i]).collect();
                Ok(l2_norm(&batch_gradient(trainer.params(), &members, &exp.train.loss)?.grad))
            })
            .collect::<Result<_>>()?;
        let report = trainer.step(batches)?;
        let w = report.weighting.ok_or_else(|| Error::Config("dynamic mode reported no weights".into()))?;
        if w.grad_norms != norms {
            return Err(Error::Numerical(format!("reported norms {:?} differ from {norms:?}", w.grad_norms)));
        }
        err_live = err_live.max(identity_error(&norms, &w.weights, eps));
    }
    Ok(metrics(&[("max_rel_error_random", err_random), ("max_rel_error_live", err_live)]))
}

fn c07_single(path: &Path) -> Result<Metrics> {
    let c = load_experiment(path)?;
    let exp = &c.experiment;
    let splits = generate_splits(&exp.dataset)?;
    let mut cache = OracleCache::in_memory();
    let mut out = Metrics::new();
    for &cls in &c.classes {
        let data = prepare_classes(&splits, &[cls], &mut cache)?.remove(0);
        let (best, history) = train_single(init_model(&exp.model)?, &data, &exp.train)?;
        let report = evaluate(&best, &data.test)?;
        let name = class_name(cls);
        out.insert(format!("{name}_test_ar"), report.classes[0].mean_ar);
        out.insert(format!("{name}_best_epoch"), history.best_epoch.unwrap_or(0) as f64);
    }
    Ok(out)
}

fn c08_multi(path: &Path) -> Result<Metrics> {
    let c = load_experiment(path)?;
    let exp = &c.experiment;
    let single = c.single.ok_or_else(|| Error::Config("missing [single] training config".into()))?;
    let splits = generate_splits(&exp.dataset)?;
    let data = prepare_classes(&splits, &exp.classes, &mut OracleCache::in_memory())?;
    let tests: Vec<Instance> = data.iter().flat_map(|d| d.test.iter().cloned()).collect();
    let mut out = Metrics::new();

    let mut gaps = Vec::new();
    for d in &data {
        let (best, _) = train_single(init_model(&exp.model)?, d, &single)?;
        let gap = evaluate(&best, &d.test)?.ag;
        out.insert(format!("single_{}_gap", class_name(d.class)), gap);
        gaps.push(gap);
    }
    let single_ag = gaps.iter().sum::<f64>() / gaps.len() as f64;
    out.insert("single_ag".into(), single_ag);

    let mut multi = BTreeMap::new();
    for (label, mode) in [("erm", TrainMode::MultiErm), ("dw", TrainMode::MultiDynamic)] {
        let cfg = TrainConfig { mode, ..exp.train };
        let (best, _) = train_multi(init_model(&exp.model)?, &data, &cfg)?;
        let r = evaluate(&best, &tests)?;
        for cs in &r.classes {
            out.insert(format!("{label}_{}_gap", class_name(cs.class)), cs.mean_gap);
        }
        out.insert(format!("{label}_ag"), r.ag);
        out.insert(format!("{label}_worst_gap"), r.worst_class_gap());
        multi.insert(label, (r.ag, r.worst_class_gap()));
    }
    out.insert("ag_distance_dw_single".into(), (multi["dw"].0 - single_ag).abs());
    out.insert("worst_gap_excess_dw_erm".into(), multi["dw"].1 - multi["erm"].1);
    Ok(out)
}

fn c09_finetune(path: &Path) -> Result<Metrics> {
    let c = load_experiment(path)?;
    let exp = &c.experiment;
    let held = exp.eval.held_out.ok_or_else(|| Error::Config("eval.held_out is required".into()))?;
    let splits = generate_splits(&exp.dataset)?;
    let mut cache = OracleCache::in_memory();
    let data = prepare_classes(&splits, &exp.classes, &mut cache)?;
    let target = prepare_classes(&splits, &[held], &mut cache)?.remove(0);
    let (params, _) = train_multi(init_model(&exp.model)?, &data, &exp.train)?;
    let (_, trace) = finetune(&params, &target.train, &target.test, exp.eval.finetune_steps, &exp.train)?;
    let zero = trace[0];
    let best = trace[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let last = *trace.last().unwrap_or(&zero);
    Ok(metrics(&[
        ("zero_shot_ar", zero),
        ("best_ar", best),
        ("best_gain", best - zero),
        ("final_gain", last - zero),
    ]))
}

fn c10_warmstart(path: &Path) -> Result<Metrics> {
    let c = load_experiment(path)?;
    let exp = &c.experiment;
    let splits = generate_splits(&exp.dataset)?;
    let data = prepare_classes(&splits, &exp.classes, &mut OracleCache::in_memory())?.remove(0);
    let (params, _) = train_single(init_model(&exp.model)?, &data, &exp.train)?;
    let rows = warmstart_pairs(&params, &data.test, &BranchAndBoundAdapter::default(), exp.eval.time_limit)?;
    // Improvement in the class's own sense.
    let sign = match data.class.sense() {
        Sense::Max => 1.0,
        Sense::Min => -1.0,
    };
    let n = rows.len() as f64;
    let mean = |f: &dyn Fn(&hetqp::cli::WarmStartRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let min = |f: &dyn Fn(&hetqp::cli::WarmStartRow) -> f64| rows.iter().map(f).fold(f64::INFINITY, f64::min);
    Ok(metrics(&[
        ("instances", n),
        ("mean_cold", mean(&|r| r.cold)),
        ("mean_warm", mean(&|r| r.warm)),
        ("mean_start", mean(&|r| r.decoded)),
        ("mean_warm_minus_cold", sign * (mean(&|r| r.warm) - mean(&|r| r.cold))),
        ("min_warm_minus_cold", min(&|r| sign * (r.warm - r.cold))),
        ("min_warm_minus_start", min(&|r| sign * (r.warm - r.decoded))),
        ("proven_pairs", rows.iter().filter(|r| r.cold_proven && r.warm_proven).count() as f64),
    ]))
}

fn run_criterion(id: &str, path: &Path) -> Result<Metrics> {
    match id {
        "1" => c01_binary_exactness(path),
        "2" => c02_infeasibility_floor(path),
        "3" => c03_decoders(path),
        "4" => c04_oracle(path),
        "5" => c05_gradients(path),
        "6" => c06_dynamic_weights(path),
        "7" => c07_single(path),
        "8" => c08_multi(path),
        "9" => c09_finetune(path),
        "10" => c10_warmstart(path),
        other => Err(Error::Config(format!("unknown criterion {other}"))),
    }
}

fn main() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..");
    let mut manifest = ReproManifest::load(root.join("configs/acceptance/manifest.toml")).expect("manifest loads");
    manifest.require_ids(&IDS).expect("manifest lists every criterion once");

    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    if !only.is_empty() {
        manifest.criteria.retain(|c| c.id == "11" || only.contains(&c.id));
    }
    let reruns: Vec<(String, PathBuf)> = manifest
        .criteria
        .iter()
        .filter(|c| c.id != "11")
        .map(|c| (c.id.clone(), manifest.config_path(c)))
        .collect();

    let mut first: BTreeMap<String, Metrics> = BTreeMap::new();
    let report = run_manifest(&manifest, |c, path| {
        if c.id != "11" {
            let m = run_criterion(&c.id, path)?;
            first.insert(c.id.clone(), m.clone());
            return Ok(m);
        }
        let (mut compared, mut mismatched) = (0usize, 0usize);
        for (id, p) in &reruns {
            let again = run_criterion(id, p)?;
            let Some(before) = first.get(id) else {
                mismatched += 1;
                continue;
            };
            for key in before.keys().chain(again.keys().filter(|k| !before.contains_key(*k))) {
                compared += 1;
                let same = matches!((before.get(key), again.get(key)), (Some(a), Some(b)) if a.to_bits() == b.to_bits());
                if !same {
                    eprintln!("criterion {id}: {key} changed between runs");
                    mismatched += 1;
                }
            }
        }
        Ok(metrics(&[("mismatched_metrics", mismatched as f64), ("compared_metrics", compared as f64)]))
    });

    print!("{}", report.summary());
    let out = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance_report.json");
    std::fs::write(&out, report.to_json()).expect("report written");
    println!("report: {}", out.display());
    if !report.all_passed() {
        println!("failed criteria: {:?}", report.failed_ids());
        std::process::exit(1);
    }
}
