use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use crate::colligation::Colligation;
use crate::error::Result;
use crate::polymorphism::{polymorphism_measure, KernelEvaluator};
use crate::rx::{phi_measure, xi_measure, PhiParams, RxMeasure, XiParams};

/// What to export.
#[derive(Clone, Debug)]
pub enum ExportKind {
    Phi(PhiParams),
    Xi(XiParams),
    /// The fiber measure of a colligation over `(x, u)`.
    Fiber {
        colligation: Colligation,
        x: Vec<f64>,
        u: Vec<f64>,
        tol: f64,
    },
}

/// Builds the measure and writes it to `path`: the JSON document when the
/// extension is `.json`, the CSV rows otherwise.
pub fn export_measure(kind: &ExportKind, path: &Path) -> Result<RxMeasure> {
    let measure = match kind {
        ExportKind::Phi(p) => phi_measure(*p)?,
        ExportKind::Xi(p) => xi_measure(*p)?,
        ExportKind::Fiber {
            colligation,
            x,
            u,
            tol,
        } => {
            let ke = KernelEvaluator::new(colligation)?;
            polymorphism_measure(&ke, x, u, *tol)?.measure
        }
    };
    if path.extension().is_some_and(|e| e == "json") {
        std::fs::write(path, measure.to_json()? + "\n")?;
    } else {
        measure.write_csv(BufWriter::new(File::create(path)?))?;
    }
    Ok(measure)
}
