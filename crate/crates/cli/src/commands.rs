use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use heatflux::closures::{Closure, KineticClosure, NavierStokesClosure, NeuralClosure, WindowModel, ZeroClosure};
use heatflux::datagen::{generate_dataset, EpsSampling, InitFamily, InitialProfiles};
use heatflux::dataset::{Dataset, DATASET_MAGIC};
use heatflux::evaluation::{
    compare_many, eps_class_summaries, log_spaced, predict_vs_dataset, resolution_test, sample_runs, select,
    smoothing_sweep, stability_sweep, success_counts, time_error_study, write_csv, CompareConfig, ErrorRecord,
    ModelTag, RunSpec, Summary,
};
use heatflux::fluid::{run_fluid, FluidState};
use heatflux::kinetic::{maxwellian, KineticSim};
use heatflux::model::{Precision, TrainedModel, MODEL_MAGIC};
use heatflux::processing::{reconstruction_weight, WindowSet};
use heatflux::trainer::{split_entries, train, Split};
use heatflux::vnet::{param_count, VNetConfig};
use heatflux::{Error, Result};

use crate::config::RunConfig;
use crate::{ClosureArg, Cli, Command, InitArg, SplitArg, Suite};

struct Ctx {
    cfg: RunConfig,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    /// Writes the resolved configuration next to the command's outputs.
    fn echo(&self, command: &str) -> Result<()> {
        let text = format!("# resolved configuration of `heatflux {command}`\n{}", self.cfg.to_toml()?);
        std::fs::write(self.path(&format!("{command}.config.toml")), text)?;
        Ok(())
    }

    fn write_records(&self, name: &str, records: &[ErrorRecord]) -> Result<()> {
        let mut w = self.create(name)?;
        write_csv(records, &mut w)?;
        w.flush()?;
        eprintln!("wrote {}", self.path(name).display());
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.set_seed(s);
    }
    if let Command::Info { file } = &cli.command {
        return info(file);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    std::fs::create_dir_all(&out)?;
    cfg.output_dir = out.clone();
    let mut ctx = Ctx { cfg, out };
    match cli.command {
        Command::Datagen { n_eps, inits, times, nx, nv, random_eps, discontinuous, name } => {
            let g = &mut ctx.cfg.gen;
            n_eps.map(|v| g.n_eps = v);
            inits.map(|v| g.inits_per_eps = v);
            times.map(|v| g.times_per_run = v);
            nx.map(|v| g.nx = v);
            nv.map(|v| g.nv = v);
            if random_eps {
                g.eps_sampling = EpsSampling::Random;
            }
            if discontinuous {
                g.init_family = InitFamily::Discontinuous;
            }
            ctx.cfg.validate()?;
            ctx.echo("datagen")?;
            datagen(&ctx, &name)
        }
        Command::Train { dataset, series, epochs, batch_size, name } => {
            let t = &mut ctx.cfg.train;
            series.map(|v| t.series = v);
            epochs.map(|v| t.epochs_per_series = v);
            batch_size.map(|v| t.batch_size = v);
            ctx.cfg.validate()?;
            ctx.echo("train")?;
            train_cmd(&ctx, &dataset, &name)
        }
        Command::Predict { model, dataset, split, sigma } => {
            ctx.echo("predict")?;
            predict(&ctx, &model, &dataset, split, sigma)
        }
        Command::Sim { closure, model, init, eps, t_end, nx, record_dt, run_id } => {
            let c = &mut ctx.cfg.compare;
            t_end.map(|v| c.t_end = v);
            nx.map(|v| c.nx = v);
            record_dt.map(|v| c.record_dt = v);
            ctx.cfg.validate()?;
            ctx.echo("sim")?;
            sim(&ctx, closure, model.as_deref(), init, eps, run_id)
        }
        Command::Eval { suite, model, dataset, split, runs } => {
            ctx.echo("eval")?;
            eval(&ctx, suite, model.as_deref(), dataset.as_deref(), split, runs)
        }
        Command::Info { .. } => unreachable!(),
    }
}

fn datagen(ctx: &Ctx, name: &str) -> Result<()> {
    let g = &ctx.cfg.gen;
    eprintln!("generating {} runs (seed {})", g.run_count(), g.seed);
    let report = generate_dataset(g)?;
    for (id, msg) in &report.failures {
        eprintln!("run {id} failed: {msg}");
    }
    if report.dataset.is_empty() {
        return Err(Error::Numerical("every generation run failed".into()));
    }
    report.dataset.save(ctx.path(name))?;
    println!(
        "dataset: {} entries, nx = {}, {} failed runs -> {}",
        report.dataset.len(),
        report.dataset.nx,
        report.failures.len(),
        ctx.path(name).display()
    );
    Ok(())
}

fn train_cmd(ctx: &Ctx, dataset: &Path, name: &str) -> Result<()> {
    let ds = Dataset::load(dataset)?;
    let c = &ctx.cfg;
    eprintln!(
        "training on {} entries: {} series x {} epochs, batch {}, seed {}",
        ds.len(),
        c.train.series,
        c.train.epochs_per_series,
        c.train.batch_size,
        c.train.seed
    );
    let outcome = train(&ds, &c.vnet, &c.pipeline, &c.train, |e, h| {
        eprintln!("epoch {e:4}  lr {:.3e}  train {:.5e}  val {:.5e}", h.lr[e], h.train_mae[e], h.val_mae[e]);
    })?;
    outcome.model.save(ctx.path(name))?;
    let mut w = csv::Writer::from_writer(ctx.create("train_history.csv")?);
    w.write_record(["epoch", "lr", "train_mae", "val_mae"]).map_err(csv_err)?;
    let h = &outcome.history;
    for e in 0..h.lr.len() {
        w.write_record([e.to_string(), h.lr[e].to_string(), h.train_mae[e].to_string(), h.val_mae[e].to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    let split = serde_json::to_string_pretty(&outcome.split).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(ctx.path("split.json"), split)?;
    println!(
        "best validation MAE {:.5e} at epoch {} -> {}",
        h.val_mae[outcome.model.best_epoch],
        outcome.model.best_epoch,
        ctx.path(name).display()
    );
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// Entry indices of a split, recomputed from the training seed.
fn split_indices(ctx: &Ctx, ds: &Dataset, model_seed: u64, split: SplitArg) -> Result<Vec<usize>> {
    if split == SplitArg::All {
        return Ok((0..ds.len()).collect());
    }
    let cfg = heatflux::trainer::TrainConfig { seed: model_seed, ..ctx.cfg.train };
    let Split { train, val, test } = split_entries(ds.len(), &cfg)?;
    Ok(match split {
        SplitArg::Train => train,
        SplitArg::Val => val,
        _ => test,
    })
}

fn print_summary(label: &str, recs: &[&ErrorRecord]) {
    let s = Summary::of_records(recs);
    let mean = {
        let v: Vec<f64> = recs.iter().filter_map(|r| r.value.value()).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    println!(
        "{label}: n = {} (undefined {}, failed {}), mean {mean:.17e}, median {:.6e}, IQR [{:.6e}, {:.6e}]",
        s.count, s.undefined, s.failed, s.median, s.q1, s.q3
    );
}

fn predict(ctx: &Ctx, model: &Path, dataset: &Path, split: SplitArg, sigma: Option<f64>) -> Result<()> {
    let mut m = TrainedModel::load(model)?;
    if let Some(s) = sigma {
        m.pipeline.smoothing_sigma = s;
    }
    let ds = Dataset::load(dataset)?;
    let entries = split_indices(ctx, &ds, m.seed, split)?;
    let recs = match ctx.cfg.eval.precision {
        Precision::F64 => predict_vs_dataset(&m.closure()?, &ds, &entries)?,
        Precision::F32 => predict_vs_dataset(&m.closure_f32()?, &ds, &entries)?,
    };
    ctx.write_records("predict.csv", &recs)?;
    print_summary("rel_l2 NN-estimate", &select(&recs, ModelTag::NnEstimate, "rel_l2"));
    print_summary("rel_l2 NS-estimate", &select(&recs, ModelTag::NsEstimate, "rel_l2"));
    Ok(())
}

fn initial(ctx: &Ctx, init: InitArg, nx: usize, eps: f64, run_id: u64) -> Result<InitialProfiles> {
    let family = match init {
        InitArg::Uniform => {
            return Ok(InitialProfiles { rho: vec![1.0; nx], u: vec![0.0; nx], temperature: vec![1.0; nx], mach: 0.0 })
        }
        InitArg::Smooth => InitFamily::Smooth,
        InitArg::Discontinuous => InitFamily::Discontinuous,
    };
    // one run per id: sample ids 0..=run_id and keep the last
    let eps_list = vec![eps; run_id as usize + 1];
    Ok(sample_runs(&eps_list, nx, family, ctx.cfg.eval.seed)?.pop().expect("non-empty").init)
}

fn sim(ctx: &Ctx, closure: ClosureArg, model: Option<&Path>, init: InitArg, eps: f64, run_id: u64) -> Result<()> {
    let c = &ctx.cfg.compare;
    let grid = c.phase_grid()?;
    let p = initial(ctx, init, c.nx, eps, run_id)?;
    let state = FluidState::from_primitives(&p.rho, &p.u, &p.temperature, grid.space)?;
    let mut boxed: Box<dyn Closure> = match closure {
        ClosureArg::Zero => Box::new(ZeroClosure),
        ClosureArg::Ns => Box::new(NavierStokesClosure),
        ClosureArg::Kinetic => {
            let f0 = maxwellian(&p.rho, &p.u, &p.temperature, &grid)?;
            Box::new(KineticClosure::new(KineticSim::new(f0, eps, grid, c.kinetic)?)?)
        }
        ClosureArg::Neural => {
            let path = model.ok_or_else(|| Error::Config("--model is required for the neural closure".into()))?;
            let m = TrainedModel::load(path)?;
            match ctx.cfg.eval.precision {
                Precision::F64 => Box::new(m.closure()?),
                Precision::F32 => Box::new(m.closure_f32()?),
            }
        }
    };
    eprintln!("simulating {closure:?} closure to t = {} (eps = {eps}, run {run_id})", c.t_end);
    let traj = run_fluid(state, boxed.as_mut(), eps, c.t_end, c.record_dt, &c.fluid)?;
    let mut w = csv::Writer::from_writer(ctx.create("sim_fields.csv")?);
    w.write_record(["time", "x", "rho", "u", "temperature", "q", "e"]).map_err(csv_err)?;
    for r in &traj.records {
        let prim = heatflux::fluid::primitive_vars(&r.state)?;
        for i in 0..r.state.len() {
            let row = [r.time, r.state.grid.x(i), prim.rho[i], prim.u[i], prim.temperature[i], r.q[i], r.field.e[i]];
            w.write_record(row.iter().map(|v| format!("{v:e}"))).map_err(csv_err)?;
        }
    }
    w.flush()?;
    let tag = match closure {
        ClosureArg::Zero => ModelTag::Euler,
        ClosureArg::Ns => ModelTag::NavierStokes,
        ClosureArg::Kinetic => ModelTag::FluidKinetic,
        ClosureArg::Neural => ModelTag::FluidNetwork,
    };
    let recs: Vec<ErrorRecord> = traj
        .times()
        .into_iter()
        .zip(traj.electric_energies())
        .map(|(t, e)| {
            ErrorRecord::new(run_id, eps, tag, "electric_energy", Some(t), heatflux::evaluation::MetricValue::Value(e))
        })
        .collect();
    ctx.write_records("sim_energy.csv", &recs)?;
    println!("reached t = {} in {} steps", traj.last().map_or(0.0, |r| r.time), traj.steps);
    Ok(())
}

fn load_model(model: Option<&Path>) -> Result<TrainedModel> {
    TrainedModel::load(model.ok_or_else(|| Error::Config("this suite needs --model".into()))?)
}

fn load_dataset(dataset: Option<&Path>) -> Result<Dataset> {
    Dataset::load(dataset.ok_or_else(|| Error::Config("this suite needs --dataset".into()))?)
}

fn eval(ctx: &Ctx, suite: Suite, model: Option<&Path>, dataset: Option<&Path>, split: SplitArg, runs: Option<usize>) -> Result<()> {
    match suite {
        Suite::Windows => return windows_suite(ctx),
        Suite::Params => return params_suite(ctx),
        _ => {}
    }
    let m = load_model(model)?;
    match ctx.cfg.eval.precision {
        Precision::F64 => model_suite(ctx, suite, &m, &m.closure()?, dataset, split, runs),
        Precision::F32 => model_suite(ctx, suite, &m, &m.closure_f32()?, dataset, split, runs),
    }
}

fn model_suite<M: WindowModel + Clone>(
    ctx: &Ctx,
    suite: Suite,
    m: &TrainedModel,
    net: &NeuralClosure<M>,
    dataset: Option<&Path>,
    split: SplitArg,
    runs: Option<usize>,
) -> Result<()> {
    let e = &ctx.cfg.eval;
    let cmp: &CompareConfig = &ctx.cfg.compare;
    let spread = |n: usize| log_spaced(e.eps_range, n);
    let entries = |ds: &Dataset| split_indices(ctx, ds, m.seed, split);
    match suite {
        Suite::Pred => {
            let ds = load_dataset(dataset)?;
            let recs = predict_vs_dataset(net, &ds, &entries(&ds)?)?;
            ctx.write_records("eval_pred.csv", &recs)?;
            print_summary("rel_l2 NN-estimate", &select(&recs, ModelTag::NnEstimate, "rel_l2"));
            print_summary("rel_l2 NS-estimate", &select(&recs, ModelTag::NsEstimate, "rel_l2"));
        }
        Suite::Time => {
            let specs = sample_runs(&spread(runs.unwrap_or(e.time_runs)), ctx.cfg.gen.nx, InitFamily::Smooth, e.seed)?;
            let recs = time_error_study(net, &specs, &ctx.cfg.gen, e.time_t_end, e.time_record_dt)?;
            ctx.write_records("eval_time.csv", &recs)?;
            print_summary("rel_l2 NN-estimate", &select(&recs, ModelTag::NnEstimate, "rel_l2"));
            print_summary("rel_l2 NS-estimate", &select(&recs, ModelTag::NsEstimate, "rel_l2"));
        }
        Suite::Compare => {
            let specs = sample_runs(&spread(runs.unwrap_or(e.comparison_runs)), cmp.nx, InitFamily::Smooth, e.seed)?;
            let models = [ModelTag::FluidKinetic, ModelTag::FluidNetwork, ModelTag::NavierStokes];
            comparison_output(ctx, "eval_compare", net, &specs, &models)?;
        }
        Suite::Discontinuity => {
            let n = runs.unwrap_or(e.discontinuity_runs);
            let specs = sample_runs(&spread(n), cmp.nx, InitFamily::Discontinuous, e.seed)?;
            comparison_output(ctx, "eval_discontinuity", net, &specs, &[ModelTag::FluidNetwork])?;
        }
        Suite::Stability => {
            let specs = sample_runs(&spread(runs.unwrap_or(e.stability_runs)), cmp.nx, InitFamily::Smooth, e.seed)?;
            let recs = stability_sweep(net, &specs, &e.stability_sigmas, e.stability_t, cmp)?;
            ctx.write_records("eval_stability.csv", &recs)?;
            for (s, n) in e.stability_sigmas.iter().zip(success_counts(&recs, &e.stability_sigmas)) {
                println!("sigma {s}: {n}/{} runs reached t = {}", specs.len(), e.stability_t);
            }
        }
        Suite::Smoothing => {
            let ds = load_dataset(dataset)?;
            let recs = smoothing_sweep(net, &ds, &entries(&ds)?, &e.smoothing_sigmas)?;
            ctx.write_records("eval_smoothing.csv", &recs)?;
            for &s in &e.smoothing_sigmas {
                let sel: Vec<&ErrorRecord> = recs.iter().filter(|r| r.param == Some(s)).collect();
                print_summary(&format!("sigma {s}"), &sel);
            }
        }
        Suite::Resolution => {
            let ds = load_dataset(dataset)?;
            let recs = resolution_test(net, &ds, &entries(&ds)?, &e.resolution_targets)?;
            ctx.write_records("eval_resolution.csv", &recs)?;
            for &n in &e.resolution_targets {
                for metric in ["rel_l2_naive", "rel_l2_corrected"] {
                    let sel: Vec<&ErrorRecord> =
                        recs.iter().filter(|r| r.param == Some(n as f64) && r.metric == metric).collect();
                    print_summary(&format!("{n} {metric}"), &sel);
                }
            }
        }
        Suite::Windows | Suite::Params => unreachable!(),
    }
    Ok(())
}

fn comparison_output<M: WindowModel>(
    ctx: &Ctx,
    stem: &str,
    net: &NeuralClosure<M>,
    specs: &[RunSpec],
    models: &[ModelTag],
) -> Result<()> {
    let comps = compare_many(Some(net), specs, models, &ctx.cfg.compare)?;
    let recs: Vec<ErrorRecord> = comps.iter().flat_map(|c| c.records()).collect();
    ctx.write_records(&format!("{stem}.csv"), &recs)?;
    let mut w = csv::Writer::from_writer(ctx.create(&format!("{stem}_classes.csv"))?);
    w.write_record(["eps_lo", "eps_hi", "model", "count", "undefined", "failed", "median", "q1", "q3"])
        .map_err(csv_err)?;
    for &m in models {
        let sel = select(&recs, m, "log_energy_error");
        print_summary(&format!("log_energy_error {m}"), &sel);
        for ([lo, hi], s) in eps_class_summaries(&sel, ctx.cfg.eval.eps_classes, ctx.cfg.eval.eps_range) {
            let row = [
                lo.to_string(),
                hi.to_string(),
                m.to_string(),
                s.count.to_string(),
                s.undefined.to_string(),
                s.failed.to_string(),
                s.median.to_string(),
                s.q1.to_string(),
                s.q3.to_string(),
            ];
            w.write_record(row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn windows_suite(ctx: &Ctx) -> Result<()> {
    let p = &ctx.cfg.pipeline;
    let ws = WindowSet::layout(p.training_resolution, p)?;
    let mut w = csv::Writer::from_writer(ctx.create("eval_windows.csv")?);
    w.write_record(["window", "offset", "source_index", "weight"]).map_err(csv_err)?;
    for (k, &start) in ws.starts.iter().enumerate() {
        for off in 0..p.window_size {
            let useful = off.checked_sub(ws.margin_points).filter(|&u| u < ws.useful_len);
            let weight = useful.map_or(0.0, |u| reconstruction_weight(u, ws.useful_len, p.redundancy));
            let src = (start + off) % ws.source_len;
            w.write_record([k.to_string(), off.to_string(), src.to_string(), weight.to_string()]).map_err(csv_err)?;
        }
    }
    w.flush()?;
    println!(
        "{} windows of {} points, stride {}, margin {} -> {}",
        ws.starts.len(),
        p.window_size,
        ws.stride,
        ws.margin_points,
        ctx.path("eval_windows.csv").display()
    );
    Ok(())
}

fn params_suite(ctx: &Ctx) -> Result<()> {
    let base = ctx.cfg.vnet;
    let mut w = csv::Writer::from_writer(ctx.create("eval_params.csv")?);
    w.write_record(["levels", "depth", "kernel", "params"]).map_err(csv_err)?;
    for levels in 3..=6 {
        for depth in [2, 4, 8] {
            for kernel in (3..=13).step_by(2) {
                let c = VNetConfig { levels, depth, kernel, ..base };
                if c.validate().is_ok() {
                    w.write_record([levels, depth, kernel, param_count(&c)].map(|v| v.to_string())).map_err(csv_err)?;
                }
            }
        }
    }
    w.flush()?;
    println!("reference network: {} parameters", param_count(&base));
    Ok(())
}

fn info(file: &Path) -> Result<()> {
    let mut head = Vec::new();
    BufReader::new(File::open(file)?).take(64).read_to_end(&mut head)?;
    if head.starts_with(DATASET_MAGIC.as_bytes()) {
        let ds = Dataset::load(file)?;
        let (lo, hi) = ds.entries.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), e| (a.min(e.eps), b.max(e.eps)));
        println!("dataset");
        println!("entries: {}", ds.len());
        println!("nx: {}", ds.nx);
        println!("seed: {}", ds.seed);
        if !ds.is_empty() {
            println!("eps: [{lo}, {hi}]");
        }
        Ok(())
    } else if head.starts_with(MODEL_MAGIC.as_bytes()) {
        let m = TrainedModel::load(file)?;
        let c = m.config();
        println!("model");
        println!("parameters: {}", m.params.param_count());
        println!("window: {}, levels: {}, depth: {}, kernel: {}", c.window, c.levels, c.depth, c.kernel);
        println!("training resolution: {}", m.pipeline.training_resolution);
        println!("smoothing sigma: {}", m.pipeline.smoothing_sigma);
        println!("seed: {}", m.seed);
        println!("best epoch: {}", m.best_epoch);
        Ok(())
    } else {
        Err(Error::Format(format!("{} is neither a dataset nor a model file", file.display())))
    }
}
