use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use npsn_core::biaslab::{
    best_of_n_bias, bias_experiment, convergence_study, discrepancy_scatter, BestOfNBias,
    BiasResult, ConvergenceTable, Functional, Integrand,
};
use npsn_core::experiments::{compare_samplers, n_sweep, ComparisonRow};
use npsn_core::lds::{report, PointSet, SamplerKind};
use npsn_core::metrics::{evaluate, EvalReport, LatentSampler};
use npsn_core::npsn::{NpsnConfig, NpsnModel};
use npsn_core::predictor::{fit_head, predict_head, HeadHyper};
use npsn_core::scene::{
    dataset_to_csv, extract_scenes, load_ethucy, read_scenes, scenes_to_string, synth_generate,
    Dataset, Scene, SynthSpec,
};
use npsn_core::train::{train_with_progress, TrainConfig};

use crate::args::*;
use crate::output::Outputs;

pub struct RunContext {
    pub quiet: bool,
}

macro_rules! progress {
    ($ctx:expr, $($arg:tt)*) => {
        if !$ctx.quiet {
            eprintln!($($arg)*);
        }
    };
}

pub fn execute(command: &Command, ctx: &RunContext) -> Result<Outputs> {
    let mut out = Outputs::default();
    match command {
        Command::Lds(LdsCommand::Gen(a)) => lds_gen(a, &mut out)?,
        Command::Lds(LdsCommand::Disc(a)) => lds_disc(a, &mut out)?,
        Command::Data(DataCommand::Load(a)) => data_load(a, ctx, &mut out)?,
        Command::Data(DataCommand::Synth(a)) => data_synth(a, ctx, &mut out)?,
        Command::Data(DataCommand::Export(a)) => {
            out.add(&a.out, dataset_to_csv(&read_scenes(&a.scenes)?));
        }
        Command::FitHead(a) => {
            let data = read_scenes(&a.scenes)?;
            out.add(&a.out, fit_head(&data.scenes)?.to_text());
        }
        Command::Train(a) => train(a, ctx, &mut out)?,
        Command::Eval(a) => eval(a, ctx, &mut out)?,
        Command::Compare(a) => compare(a, ctx, &mut out)?,
        Command::SweepN(a) => sweep(a, ctx, &mut out)?,
        Command::Bias(BiasCommand::Run(a)) => bias(a, ctx, &mut out)?,
        Command::Replay(_) => bail!("replay cannot be nested"),
    }
    Ok(out)
}

fn points_csv(ps: &PointSet) -> String {
    let header: Vec<String> = (0..ps.dim()).map(|d| format!("x{d}")).collect();
    let mut s = header.join(",");
    s.push('\n');
    for p in ps.iter() {
        let row: Vec<String> = p.iter().map(ToString::to_string).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn read_points_csv(path: &Path) -> Result<PointSet> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut dim = None;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('x') || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: bad number", path.display(), i + 1))?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) => ensure!(
                d == row.len(),
                "{}:{}: expected {d} columns",
                path.display(),
                i + 1
            ),
        }
        data.extend(row);
    }
    let dim = dim.with_context(|| format!("{} holds no points", path.display()))?;
    Ok(PointSet::from_rows(dim, data)?)
}

fn lds_gen(a: &LdsGenArgs, out: &mut Outputs) -> Result<()> {
    let kind = SamplerKind::from_str(&a.sampler)?;
    out.add(&a.out, points_csv(&kind.generate(a.n, a.dim, a.seed)?));
    Ok(())
}

fn lds_disc(a: &LdsDiscArgs, out: &mut Outputs) -> Result<()> {
    let ps = match &a.input {
        Some(path) => read_points_csv(path)?,
        None => SamplerKind::from_str(&a.sampler)?.generate(a.n, a.dim, a.seed)?,
    };
    let text = report(&ps)?.to_key_values();
    print!("{text}");
    if let Some(path) = &a.out {
        out.add(path, text);
    }
    Ok(())
}

fn data_load(a: &DataLoadArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let tracks = load_ethucy(&a.input)?;
    let source = match &a.source {
        Some(s) => s.clone(),
        None => a.input.file_stem().map_or_else(
            || "ethucy".to_string(),
            |s| s.to_string_lossy().into_owned(),
        ),
    };
    ensure!(
        !source.is_empty() && !source.contains(char::is_whitespace),
        "source tag must be a single non-empty word"
    );
    let scenes = extract_scenes(&tracks, a.stride, &source)?;
    let dataset = Dataset {
        scenes,
        labels: None,
    };
    progress!(
        ctx,
        "tracks={} scenes={} pedestrians={}",
        tracks.len(),
        dataset.scenes.len(),
        dataset.pedestrian_count()
    );
    out.add(&a.out, scenes_to_string(&dataset));
    Ok(())
}

fn data_synth(a: &DataSynthArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let dataset = synth_generate(&SynthSpec {
        n_scenes: a.n_scenes,
        branch_probabilities: a.branches.clone(),
        speed: a.speed,
        noise_sigma: a.noise,
        interaction: a.interaction,
        seed: a.seed,
    })?;
    progress!(
        ctx,
        "scenes={} pedestrians={}",
        dataset.scenes.len(),
        dataset.pedestrian_count()
    );
    out.add(&a.out, scenes_to_string(&dataset));
    Ok(())
}

fn load_inputs(scenes: &Path, head: &Path) -> Result<(Vec<Scene>, HeadHyper)> {
    let data = read_scenes(scenes)?;
    ensure!(
        !data.scenes.is_empty(),
        "{} holds no scenes",
        scenes.display()
    );
    Ok((data.scenes, HeadHyper::load(head)?))
}

fn default_log_path(ckpt: &Path) -> PathBuf {
    let mut name = ckpt.as_os_str().to_owned();
    name.push(".log.csv");
    PathBuf::from(name)
}

fn train(a: &TrainArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let (scenes, hyper) = load_inputs(&a.scenes, &a.head)?;
    let model = NpsnModel::new(
        NpsnConfig {
            hidden: a.hidden,
            samples: a.samples,
            ..NpsnConfig::default()
        },
        a.seed,
    )?;
    progress!(ctx, "parameters={}", model.parameter_count());
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_scenes: a.batch,
        lr: a.lr,
        lr_step_epochs: a.lr_step,
        lr_gamma: a.lr_gamma,
        weight_decay: a.weight_decay,
        lambda: a.lambda,
        seed: a.seed,
    };
    let outcome = train_with_progress(model, &hyper, &scenes, &cfg, |e| {
        progress!(
            ctx,
            "epoch {:>4}  l_dist {:.5}  l_disc {:.5}  total {:.5}  lr {:.3e}",
            e.epoch,
            e.loss.l_dist,
            e.loss.l_disc,
            e.loss.total,
            e.lr
        );
    })?;
    let mut log = String::from("epoch,l_dist,l_disc,total,lr\n");
    for e in &outcome.log {
        let _ = writeln!(
            log,
            "{},{},{},{},{}",
            e.epoch, e.loss.l_dist, e.loss.l_disc, e.loss.total, e.lr
        );
    }
    out.add(&a.out, outcome.model.to_checkpoint());
    out.add(
        a.log.clone().unwrap_or_else(|| default_log_path(&a.out)),
        log,
    );
    Ok(())
}

fn parse_sampler(spec: &str) -> Result<LatentSampler> {
    if let Some(path) = spec.strip_prefix("npsn:") {
        let model = NpsnModel::load(path).with_context(|| format!("loading checkpoint {path}"))?;
        return Ok(LatentSampler::npsn(model));
    }
    Ok(LatentSampler::Points(SamplerKind::from_str(spec)?))
}

fn report_csv(reports: &[EvalReport]) -> String {
    let mut s = format!("{}\n", EvalReport::CSV_HEADER);
    for r in reports {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

fn eval(a: &EvalArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let (scenes, hyper) = load_inputs(&a.scenes, &a.head)?;
    let sampler = parse_sampler(&a.sampler)?;
    let r = evaluate(&scenes, &hyper, &sampler, a.n, a.repeats, a.seed)?;
    progress!(
        ctx,
        "{} n={} min_ade={:.4} min_fde={:.4} tcc={:.4}",
        r.sampler,
        r.n_samples,
        r.min_ade,
        r.min_fde,
        r.tcc
    );
    out.add(&a.out, report_csv(&[r]));
    Ok(())
}

fn compare(a: &CompareArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let (scenes, hyper) = load_inputs(&a.scenes, &a.head)?;
    let model = a
        .npsn
        .as_ref()
        .map(|p| NpsnModel::load(p).with_context(|| format!("loading checkpoint {}", p.display())))
        .transpose()?;
    let rows = compare_samplers(&scenes, &hyper, model.as_ref(), a.n, a.repeats, a.seed)?;
    let mut s = format!("{}\n", ComparisonRow::CSV_HEADER);
    for r in &rows {
        progress!(
            ctx,
            "{:<5} min_ade={:.4} min_fde={:.4} gain={:.2}%",
            r.report.sampler,
            r.report.min_ade,
            r.report.min_fde,
            r.gain_pct
        );
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    out.add(&a.out, s);
    Ok(())
}

fn sweep(a: &SweepArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let (scenes, hyper) = load_inputs(&a.scenes, &a.head)?;
    let mut samplers = Vec::new();
    for name in &a.samplers {
        ensure!(
            !name.starts_with("npsn"),
            "pass NPSN checkpoints with --npsn"
        );
        samplers.push(parse_sampler(name)?);
    }
    for path in &a.npsn {
        let model = NpsnModel::load(path)
            .with_context(|| format!("loading checkpoint {}", path.display()))?;
        samplers.push(LatentSampler::npsn(model));
    }
    let reports = n_sweep(&scenes, &hyper, &samplers, &a.grid, a.repeats, a.seed)?;
    for r in &reports {
        progress!(
            ctx,
            "{:<6} n={:<5} min_ade={:.4} min_fde={:.4}",
            r.sampler,
            r.n_samples,
            r.min_ade,
            r.min_fde
        );
    }
    out.add(&a.out, report_csv(&reports));
    Ok(())
}

fn bias(a: &BiasRunArgs, ctx: &RunContext, out: &mut Outputs) -> Result<()> {
    let samplers: Vec<SamplerKind> = a
        .sampler
        .iter()
        .map(|s| SamplerKind::from_str(s))
        .collect::<Result<_, _>>()?;
    let default_integrand = if a.experiment == Experiment::Taylor {
        "x1"
    } else {
        "product"
    };
    let tau = Integrand::by_name(a.integrand.as_deref().unwrap_or(default_integrand))?;
    let mut s = String::new();
    match a.experiment {
        Experiment::Taylor => {
            let f = match a.functional {
                FunctionalArg::Square => Functional::Square,
                FunctionalArg::Linear => Functional::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                FunctionalArg::Exp => Functional::Exp,
            };
            let _ = writeln!(s, "{}", BiasResult::CSV_HEADER);
            for &k in &samplers {
                let r = bias_experiment(&tau, f, a.n, a.trials, k, a.seed)?;
                progress!(
                    ctx,
                    "{k}: bias={:.6} predicted={:.6} se={:.6}",
                    r.empirical_bias,
                    r.predicted_bias,
                    r.standard_error
                );
                let _ = writeln!(s, "{}", r.csv_row(k));
            }
        }
        Experiment::Convergence => {
            let table = convergence_study(&tau, &samplers, &a.grid, a.trials, a.seed)?;
            for (k, slope) in &table.slopes {
                progress!(ctx, "{k}: slope={slope:.3}");
            }
            let _ = writeln!(s, "{}", ConvergenceTable::CSV_HEADER);
            for row in table.csv_rows() {
                let _ = writeln!(s, "{row}");
            }
        }
        Experiment::Bestofn => {
            let (Some(scenes), Some(head)) = (&a.scenes, &a.head) else {
                bail!("bestofn needs --scenes and --head");
            };
            let (scenes, hyper) = load_inputs(scenes, head)?;
            let scene = scenes
                .get(a.scene_index)
                .with_context(|| format!("scene index {} out of range", a.scene_index))?;
            let traj = scene
                .trajectories
                .get(a.ped)
                .with_context(|| format!("pedestrian {} out of range", a.ped))?;
            let head = predict_head(traj.observed(), &hyper)?;
            let _ = writeln!(s, "{}", BestOfNBias::CSV_HEADER);
            for &k in &samplers {
                for &n in &a.grid {
                    let r = best_of_n_bias(&head, traj.future(), k, n, a.trials, a.seed)?;
                    progress!(
                        ctx,
                        "{k} n={n}: min_ade={:.4} oracle={:.4}",
                        r.mean_min_ade,
                        r.dense_oracle
                    );
                    let _ = writeln!(s, "{}", r.csv_row(k));
                }
            }
        }
        Experiment::Scatter => {
            let _ = writeln!(s, "sampler,n,star_discrepancy,abs_error");
            for &k in &samplers {
                for p in discrepancy_scatter(&tau, k, a.n, a.trials, a.seed)? {
                    let _ = writeln!(s, "{k},{},{},{}", a.n, p.star_discrepancy, p.abs_error);
                }
            }
        }
    }
    out.add(&a.out, s);
    Ok(())
}
