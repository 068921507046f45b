use std::fmt::Write as _;
use std::time::Instant;

use driftclust::dataio::{load_checkpoint, save_checkpoint, write_atomic, write_labels};
use driftclust::trainer::{parse_canonical_config, TRAINER_KEYS};
use driftclust::{
    run, BackboneKind, BackboneSpec, Dataset, Error, KvDoc, Mode, RunResult, Trainer, TrainerConfig,
};

use crate::args::ClusterArgs;
use crate::failure::Failure;
use crate::settings::Settings;

pub fn cmd_cluster(args: &ClusterArgs) -> Result<(), Failure> {
    let mut settings = Settings::for_cluster(args)?;
    let start = Instant::now();

    let resumed = match &settings.resume {
        Some(path) => {
            let ckpt = load_checkpoint(path)?;
            let (config, spec) = parse_canonical_config(&ckpt.config_text)?;
            check_resume_matches(&settings, &config, &spec)?;
            settings.trainer = config;
            settings.backbone = spec.kind;
            settings.backbone_dim = spec.output_dim;
            settings.backbone_seed = spec.seed;
            Some(ckpt)
        }
        None => None,
    };
    if settings.trainer.mode == Mode::BaselineIII
        && (settings.checkpoint.is_some() || resumed.is_some())
    {
        return Err(Failure::config(
            "baseline3 solves the full set at once and has no checkpoints",
        ));
    }

    let data = settings.load_dataset()?;
    let spec = settings.backbone_spec(&data);
    let result = if settings.trainer.mode == Mode::BaselineIII {
        run(&data, spec, settings.trainer.clone(), data.labels())?
    } else {
        let trainer = match resumed {
            Some(ckpt) => Trainer::from_checkpoint(&data, ckpt, data.labels())?,
            None => Trainer::new(&data, spec, settings.trainer.clone(), data.labels())?,
        };
        match train(trainer, &settings, args.stop_after)? {
            Some(r) => r,
            None => return Ok(()),
        }
    };
    let wall_ms = start.elapsed().as_millis();

    if let Some(p) = &settings.out_labels {
        write_labels(p, &result.labels)?;
    }
    if let Some(p) = &settings.out_metrics {
        write_atomic(
            p,
            metrics_text(&settings.trainer, &data, &result).as_bytes(),
        )?;
    }
    println!("{}", summary_line(&settings.trainer, &result));
    println!("wall_ms={wall_ms}");
    Ok(())
}

/// Runs epochs until done, checkpointing after each one. Returns `None` when
/// `stop_after` cut the run short.
fn train(
    mut trainer: Trainer,
    settings: &Settings,
    stop_after: Option<u64>,
) -> Result<Option<RunResult>, Failure> {
    let mut epochs_here = 0;
    while !trainer.is_done() {
        if stop_after.is_some_and(|n| epochs_here >= n) {
            println!(
                "stopped after epoch {} of {}",
                trainer.progress().epochs_done,
                trainer.config().epochs
            );
            return Ok(None);
        }
        trainer.run_epoch()?;
        epochs_here += 1;
        if let Some(p) = &settings.checkpoint {
            save_checkpoint(p, &trainer.checkpoint())?;
        }
    }
    Ok(Some(trainer.finish()?))
}

/// Settings given explicitly next to `--resume` must agree with the
/// checkpoint; the checkpoint supplies everything else.
fn check_resume_matches(
    settings: &Settings,
    config: &TrainerConfig,
    spec: &BackboneSpec,
) -> Result<(), Failure> {
    let differs = |key: &str| -> Failure {
        Error::Config {
            key: key.to_string(),
            message: "differs from the resumed checkpoint".into(),
        }
        .into()
    };
    for key in settings.explicit.keys() {
        if TRAINER_KEYS.contains(&key) {
            let mut single = KvDoc::new();
            single.set(key, settings.explicit.get(key).unwrap_or_default());
            let mut merged = config.clone();
            merged.apply_kv(&single)?;
            if &merged != config {
                return Err(differs(key));
            }
        }
    }
    let explicit = |key: &str| settings.explicit.get(key).is_some();
    if explicit("backbone") && settings.backbone != spec.kind {
        return Err(differs("backbone"));
    }
    if explicit("backbone_dim")
        && spec.kind == BackboneKind::RandomProjection
        && settings.backbone_dim != spec.output_dim
    {
        return Err(differs("backbone_dim"));
    }
    if explicit("backbone_seed") && settings.backbone_seed != spec.seed {
        return Err(differs("backbone_seed"));
    }
    Ok(())
}

pub fn format_nmi(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.6}"))
}

pub fn summary_line(config: &TrainerConfig, r: &RunResult) -> String {
    format!(
        "mode={} k={} epochs={} nmi={}",
        config.mode,
        config.k,
        config.epochs,
        format_nmi(r.final_nmi)
    )
}

/// Deterministic for a fixed configuration: no timings.
pub fn metrics_text(config: &TrainerConfig, data: &Dataset, r: &RunResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "dataset={}", data.name());
    let _ = writeln!(out, "samples={}", data.len());
    let _ = writeln!(out, "mode={}", config.mode);
    let _ = writeln!(out, "k={}", config.k);
    let _ = writeln!(out, "nm={}", config.n_m);
    let _ = writeln!(out, "km={}", config.k_m);
    let _ = writeln!(out, "eta={}", config.eta);
    let _ = writeln!(out, "epochs={}", config.epochs);
    let _ = writeln!(out, "seed={}", config.seed);
    let _ = writeln!(out, "batches={}", r.batches);
    let _ = writeln!(out, "finetunes={}", r.finetunes);
    if let Some(v) = r.final_nmi {
        let _ = writeln!(out, "nmi={v}");
    }
    let history: Vec<String> = r.nmi_history.iter().map(f64::to_string).collect();
    let _ = writeln!(out, "nmi_history={}", history.join(","));
    out
}
