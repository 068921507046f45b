use std::time::Instant;

use driftclust::dataio::write_atomic;
use driftclust::{run, RunResult};
use rayon::prelude::*;

use crate::args::SweepArgs;
use crate::cluster::format_nmi;
use crate::failure::Failure;
use crate::settings::Settings;

pub const HEADER: &str = "km,epochs,seed,nmi,finetunes,wall_ms";

#[derive(Debug, Clone, Copy)]
struct Cell {
    km: usize,
    epochs: usize,
    seed: u64,
}

struct CellOutcome {
    cell: Cell,
    result: Result<RunResult, Failure>,
    wall_ms: u128,
}

fn run_cell(base: &Settings, cell: Cell) -> CellOutcome {
    let start = Instant::now();
    let result = (|| {
        let mut s = base.clone();
        s.trainer.k_m = cell.km;
        s.trainer.epochs = cell.epochs;
        s.trainer.seed = cell.seed;
        s.trainer.validate()?;
        let data = s.load_dataset()?;
        let spec = s.backbone_spec(&data);
        Ok(run(&data, spec, s.trainer, data.labels())?)
    })();
    CellOutcome {
        cell,
        result,
        wall_ms: start.elapsed().as_millis(),
    }
}

/// Failed cells get `failed` in the nmi column and an empty fine-tune count;
/// the sweep carries on and exits with the first failure's code.
pub fn cmd_sweep(args: &SweepArgs) -> Result<(), Failure> {
    let base = Settings::for_sweep(&args.run)?;
    let or_default = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
    let kms = or_default(&args.km_values, base.trainer.k_m);
    let epochs = or_default(&args.epoch_values, base.trainer.epochs);
    let seeds = if args.seeds.is_empty() {
        vec![base.trainer.seed]
    } else {
        args.seeds.clone()
    };

    let mut cells = Vec::new();
    for &km in &kms {
        for &e in &epochs {
            for &seed in &seeds {
                cells.push(Cell {
                    km,
                    epochs: e,
                    seed,
                });
            }
        }
    }

    let outcomes: Vec<CellOutcome> = if args.parallel {
        cells.par_iter().map(|&c| run_cell(&base, c)).collect()
    } else {
        cells.iter().map(|&c| run_cell(&base, c)).collect()
    };

    let mut csv = String::from(HEADER);
    csv.push('\n');
    let mut first_failure = None;
    for o in outcomes {
        let Cell { km, epochs, seed } = o.cell;
        match o.result {
            Ok(r) => csv.push_str(&format!(
                "{km},{epochs},{seed},{},{},{}\n",
                format_nmi(r.final_nmi),
                r.finetunes,
                o.wall_ms
            )),
            Err(f) => {
                eprintln!("cell km={km} epochs={epochs} seed={seed} failed: {f}");
                csv.push_str(&format!("{km},{epochs},{seed},failed,,{}\n", o.wall_ms));
                first_failure.get_or_insert(f);
            }
        }
    }

    match &args.out {
        Some(p) => write_atomic(p, csv.as_bytes())?,
        None => print!("{csv}"),
    }
    match first_failure {
        Some(f) => Err(f),
        None => Ok(()),
    }
}
