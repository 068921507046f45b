use driftclust::dataio::read_labels;
use driftclust::nmi_report;

use crate::args::EvalArgs;
use crate::failure::Failure;

pub fn cmd_eval(args: &EvalArgs) -> Result<(), Failure> {
    let truth = read_labels(&args.truth)?;
    let pred = read_labels(&args.pred)?;
    if truth.len() != pred.len() {
        return Err(Failure::config(format!(
            "label files differ in length: {} has {}, {} has {}",
            args.truth.display(),
            truth.len(),
            args.pred.display(),
            pred.len()
        )));
    }
    let report = nmi_report(&truth, &pred)?;
    if report.degenerate {
        eprintln!(
            "warning: a labeling has a single block; NMI is undefined and reported by convention"
        );
    }
    println!("{:.6}", report.value);
    Ok(())
}
