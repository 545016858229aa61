use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use boostr::boost_dynamic::fit_dynamic;
use boostr::boost_static::{fit_static, TrainingTrace};
use boostr::evaluate::{cross_validate, lhd_sample, tune, CvSettings, Method, MetricReport};
use boostr::io::{curve_rows, load_dataset_dir, save_curves, save_dataset, write_table};
use boostr::model::Model;
use boostr::simulate::{gen_dataset, DatasetKind};
use boostr::{baselines, BoostError, Dataset, TimeGrid};
use serde::Serialize;

use crate::args::*;

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn fmt(v: f64) -> String {
    v.to_string()
}

fn load(dir: &Path, grid: &GridArgs) -> Result<Dataset> {
    let ds = load_dataset_dir(dir, grid.m)?;
    match grid.t_max {
        None => Ok(ds),
        Some(t_max) => {
            let latest = ds.individuals().iter().map(|i| i.events.censor()).fold(0.0, f64::max);
            if latest > t_max {
                return Err(BoostError::InvalidArgument(format!(
                    "t-max {t_max} is before the latest censoring time {latest}"
                ))
                .into());
            }
            Ok(Dataset::with_grid(ds.individuals().to_vec(), TimeGrid::new(t_max, grid.m)?)?)
        }
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let kind: DatasetKind = a.dataset.parse()?;
    let n = a.n.unwrap_or(kind.default_n());
    let ds = gen_dataset(kind, n, a.seed.seed, 100, a.sigma)?;
    save_dataset(&ds, &a.out_dir)?;
    println!("simulated {n} individuals of dataset {kind:?} into {}", a.out_dir.display());
    Ok(())
}

fn write_trace(dir: &Path, trace: &TrainingTrace) -> Result<()> {
    let loss: Vec<Vec<String>> = trace
        .loss
        .iter()
        .enumerate()
        .map(|(k, l)| vec![k.to_string(), fmt(*l)])
        .collect();
    write_table(&dir.join("loss.csv"), &["trees", "loss"], &loss)?;
    let leaves: Vec<Vec<String>> = trace
        .leaves
        .iter()
        .enumerate()
        .map(|(k, l)| vec![(k + 1).to_string(), l.to_string()])
        .collect();
    write_table(&dir.join("leaves.csv"), &["tree", "leaves"], &leaves)?;
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let ds = load(&a.dataset, &a.grid)?;
    create_dir(&a.out_dir)?;
    let (model, trace) = match a.mode {
        Mode::Static => {
            let (ens, trace) = fit_static(&ds, &a.boost.boost_config(a.seed.seed))?;
            (Model::Static(ens), trace)
        }
        Mode::Dynamic => {
            if ds.q() == 0 {
                return Err(BoostError::InvalidArgument("dynamic mode needs a dynamic.csv in the dataset directory".into()).into());
            }
            let (ens, trace, warnings) = fit_dynamic(&ds, &a.boost.dynamic_config(a.seed.seed))?;
            if warnings > 0 {
                eprintln!("warning: {warnings} node solves hit the sweep limit");
            }
            (Model::Dynamic(ens), trace)
        }
    };
    model.save(&a.out_dir.join("model.json"))?;
    write_trace(&a.out_dir, &trace)?;
    println!(
        "trained {} trees, final loss {}",
        model.n_trees(),
        trace.loss.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

pub fn predict(a: &PredictArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let grid = match &model {
        Model::Static(m) => m.grid,
        Model::Dynamic(m) => m.grid,
    };
    let ds = load_dataset_dir(&a.dataset, grid.len())?;
    if ds.p() != model.p() {
        return Err(BoostError::DimensionMismatch {
            expected: model.p(),
            got: ds.p(),
        }
        .into());
    }
    let curves = ds
        .individuals()
        .iter()
        .map(|ind| match &model {
            Model::Static(m) => m.predict(&ind.x),
            Model::Dynamic(m) => m.predict(&ind.x, &ind.z),
        })
        .collect::<boostr::Result<Vec<_>>>()?;
    let rows = curve_rows(ds.individuals().iter().map(|i| i.id.as_str()).zip(&curves));
    save_curves(&rows, &a.out)?;
    println!("wrote {} curves to {}", curves.len(), a.out.display());
    Ok(())
}

fn parse_method(name: &str, a: &EvaluateArgs) -> Result<Method> {
    Ok(match name.trim() {
        "boostr" => Method::BoostR(a.boost.boost_config(a.seed.seed)),
        "boostr-dynamic" => Method::BoostRDynamic(a.boost.dynamic_config(a.seed.seed)),
        "pooled-mcf" => Method::PooledMcf,
        "mcf-knn" => Method::McfKnn(a.knn_k),
        "hpp-loglinear" => Method::HppLogLinear,
        "time-feature" => Method::TimeFeature(baselines::time_feature_default_config()),
        "oracle" => {
            let Some(truth) = &a.truth else {
                return Err(BoostError::InvalidArgument("oracle needs --truth".into()).into());
            };
            Method::Oracle(truth.parse()?)
        }
        other => return Err(BoostError::InvalidArgument(format!("unknown method {other:?}")).into()),
    })
}

pub fn evaluate(a: &EvaluateArgs) -> Result<()> {
    let methods = a.methods.iter().map(|m| parse_method(m, a)).collect::<Result<Vec<_>>>()?;
    let ds = load(&a.dataset, &a.grid)?;
    let settings = CvSettings {
        n_train: a.n_train,
        n_test: a.n_test,
        reps: a.reps,
        seed: a.seed.seed,
        t_eval: a.t_eval,
    };
    create_dir(&a.out_dir)?;
    let mut reports: Vec<MetricReport> = Vec::new();
    for method in &methods {
        let report = cross_validate(&ds, method, &settings)?;
        let rows: Vec<Vec<String>> = report
            .reps
            .iter()
            .map(|r| vec![r.rep.to_string(), fmt(r.c_index), fmt(r.l2), fmt(r.mse_counts)])
            .collect();
        write_table(
            &a.out_dir.join(format!("{}_reps.csv", report.method)),
            &["rep", "c_index", "l2", "mse_counts"],
            &rows,
        )?;
        println!(
            "{}: c-index {:.4}, l2 {:.4}, mse {:.4}",
            report.method, report.c_index.mean, report.l2.mean, report.mse_counts.mean
        );
        reports.push(report);
    }

    #[derive(Serialize)]
    struct Entry<'a> {
        method: &'a str,
        t_eval: f64,
        reps: usize,
        c_index: boostr::evaluate::Summary,
        l2: boostr::evaluate::Summary,
        mse_counts: boostr::evaluate::Summary,
    }
    let summary: Vec<Entry> = reports
        .iter()
        .map(|r| Entry {
            method: &r.method,
            t_eval: r.t_eval,
            reps: r.reps.len(),
            c_index: r.c_index,
            l2: r.l2,
            mse_counts: r.mse_counts,
        })
        .collect();
    write_json(&a.out_dir.join("summary.json"), &summary)
}

pub fn importance(a: &ImportanceArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let raw = model.feature_importance(false);
    let std = model.feature_importance(true);
    let rows: Vec<Vec<String>> = raw
        .iter()
        .zip(&std)
        .enumerate()
        .map(|(f, (r, s))| vec![format!("x{}", f + 1), fmt(*r), fmt(*s)])
        .collect();
    write_table(&a.out, &["feature", "raw", "standardized"], &rows)?;
    Ok(())
}

pub fn tune_cmd(a: &TuneArgs) -> Result<()> {
    let ds = load(&a.dataset, &a.grid)?;
    let ranges = [(a.gamma1_range.0, a.gamma1_range.1), (a.gamma2_range.0, a.gamma2_range.1)];
    let design = lhd_sample(&ranges, a.runs, a.seed.seed)?;
    let runs = tune(&ds, &design, &a.boost.boost_config(a.seed.seed))?;
    create_dir(&a.out_dir)?;
    let rows: Vec<Vec<String>> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                fmt(r.gamma1),
                fmt(r.gamma2),
                fmt(r.median_leaves),
                (r.in_target as u8).to_string(),
                r.leaves.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(";"),
            ]
        })
        .collect();
    write_table(
        &a.out_dir.join("tune_runs.csv"),
        &["run", "gamma1", "gamma2", "median_leaves", "in_target", "leaves"],
        &rows,
    )?;
    write_json(&a.out_dir.join("tune_summary.json"), &runs)?;
    println!(
        "{} of {} runs have a median of 4 to 8 leaves",
        runs.iter().filter(|r| r.in_target).count(),
        runs.len()
    );
    Ok(())
}

pub fn partition(a: &PartitionArgs) -> Result<()> {
    let model = Model::load(&a.model)?;
    let p = model.p();
    let boxes: Vec<Vec<(usize, Vec<(f64, f64)>)>> = match &model {
        Model::Static(m) => m.trees.iter().map(|t| t.leaf_boxes(p)).collect(),
        Model::Dynamic(m) => m.trees.iter().map(|t| t.leaf_boxes(p)).collect(),
    };
    let mut header = vec!["tree".to_string(), "node".to_string()];
    for f in 1..=p {
        header.push(format!("x{f}_lo"));
        header.push(format!("x{f}_hi"));
    }
    let mut rows = Vec::new();
    for (k, tree) in boxes.iter().enumerate() {
        for (node, bounds) in tree {
            let mut row = vec![(k + 1).to_string(), node.to_string()];
            for (lo, hi) in bounds {
                row.push(fmt(*lo));
                row.push(fmt(*hi));
            }
            rows.push(row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_table(&a.out, &header, &rows)?;
    Ok(())
}

pub fn beta_map(a: &BetaMapArgs) -> Result<()> {
    let Model::Dynamic(m) = Model::load(&a.model)? else {
        bail!(BoostError::Unsupported("beta-map needs a dynamic model".into()));
    };
    let map = m.beta_by_region(a.resolution)?;
    let header: Vec<&str> = map.header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = map.rows.iter().map(|r| r.iter().map(|v| fmt(*v)).collect()).collect();
    write_table(&a.out, &header, &rows)?;
    Ok(())
}
