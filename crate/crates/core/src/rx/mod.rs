//! Finite measures on the multiplicative half-line `t > 0`, kept in the
//! log coordinate `s = ln t`.

mod families;
mod grid;
mod law;
mod sampling;

pub use families::{
    delta_n, delta_n_circ, infinite_convolution, phi_law, phi_measure, xi_law, xi_measure,
    KernelCoordinates, PhiParams, TruncatedConvolution, XiParams, H_SEAM_TOLERANCE,
};
pub use grid::{LOG_GRID_STEP, MAX_HALF_WIDTH};
pub use law::QuadraticNormalLaw;
pub use sampling::{ks_two_sample, sample_measure};

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::warn_outside_strip;
use crate::numerics::pairwise_sum;
use grid::LogGrid;

/// Closed-form log-Mellin transform `λ ↦ ln ∫ t^λ dμ(t)`.
pub type MellinFn = Arc<dyn Fn(Complex64) -> Result<Complex64> + Send + Sync>;

/// Relative agreement demanded between a closed form and the grid sum.
pub const CLOSED_FORM_TOLERANCE: f64 = 1e-6;

/// Atoms plus a density on a uniform grid in `s = ln t`. All masses carry
/// a common factor `e^{log_scale}` so that very large or very small totals
/// stay representable.
#[derive(Clone)]
pub struct RxMeasure {
    log_scale: f64,
    atoms: Vec<(f64, f64)>,
    grid: Option<LogGrid>,
    closed_form: Option<MellinFn>,
}

impl fmt::Debug for RxMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RxMeasure")
            .field("log_scale", &self.log_scale)
            .field("atoms", &self.atoms)
            .field("grid_len", &self.grid.as_ref().map_or(0, LogGrid::len))
            .field("closed_form", &self.closed_form.is_some())
            .finish()
    }
}

impl RxMeasure {
    /// `mass · δ(t − e^{s})`, given `ln mass`.
    pub fn atom_log(s: f64, log_mass: f64) -> Self {
        let closed: MellinFn = Arc::new(move |lam: Complex64| Ok(lam * s + log_mass));
        Self {
            log_scale: log_mass,
            atoms: vec![(s, 1.0)],
            grid: None,
            closed_form: Some(closed),
        }
    }

    /// `mass · δ(t − location)`.
    pub fn atom(location: f64, mass: f64) -> Result<Self> {
        if !(location > 0.0) || !(mass >= 0.0) || !location.is_finite() || !mass.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "atom at {location} with mass {mass}"
            )));
        }
        Ok(Self::atom_log(location.ln(), mass.ln()))
    }

    /// The measure of a quadratic-normal law, with its closed form attached.
    pub fn from_law(law: QuadraticNormalLaw) -> Result<Self> {
        let closed: MellinFn = Arc::new(move |lam| law.log_mellin(lam));
        let measure = match law.deposit()? {
            None => Self {
                log_scale: law.log_mass,
                atoms: vec![(law.mean_log(), 1.0)],
                grid: None,
                closed_form: None,
            },
            Some(grid) => Self {
                log_scale: law.log_mass,
                atoms: Vec::new(),
                grid: Some(grid),
                closed_form: None,
            },
        };
        measure.normalized().with_closed_form(closed)
    }

    /// Attaches `closed`, checking it against the grid sum at `λ ∈ {0, ½, 1}`.
    /// Points where the closed form reports a branch cut are skipped.
    pub fn with_closed_form(mut self, closed: MellinFn) -> Result<Self> {
        for lam in [0.0, 0.5, 1.0] {
            let lam = Complex64::new(lam, 0.0);
            let exact = match closed(lam) {
                Ok(v) => v,
                Err(Error::BranchCut(_) | Error::BranchPoint(_)) => continue,
                Err(e) => return Err(e),
            };
            check_closed_form(self.log_mellin_numeric(lam), exact, lam)?;
        }
        self.closed_form = Some(closed);
        Ok(self)
    }

    pub fn without_closed_form(mut self) -> Self {
        self.closed_form = None;
        self
    }

    pub fn has_closed_form(&self) -> bool {
        self.closed_form.is_some()
    }

    /// `e^{log_scale}`; the masses of atoms and cells are relative to it.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// `(t, mass)` pairs.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        let scale = self.log_scale.exp();
        self.atoms
            .iter()
            .map(|&(s, w)| (s.exp(), w * scale))
            .collect()
    }

    /// `(s, density per unit s)` pairs on the log grid.
    pub fn density(&self) -> Vec<(f64, f64)> {
        let scale = self.log_scale.exp();
        match &self.grid {
            None => Vec::new(),
            Some(g) => g.points().map(|(s, w)| (s, w * scale / g.step())).collect(),
        }
    }

    pub fn grid_len(&self) -> usize {
        self.grid.as_ref().map_or(0, LogGrid::len)
    }

    /// Half-width of the density's support in the log coordinate.
    pub fn grid_half_width(&self) -> f64 {
        self.grid.as_ref().map_or(0.0, LogGrid::half_width)
    }

    fn relative_total(&self) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.1).sum();
        atoms + self.grid.as_ref().map_or(0.0, LogGrid::total)
    }

    pub fn log_total_mass(&self) -> f64 {
        self.log_scale + self.relative_total().ln()
    }

    pub fn total_mass(&self) -> f64 {
        self.log_total_mass().exp()
    }

    /// Rescales relative weights to sum to one.
    fn normalized(mut self) -> Self {
        let total = self.relative_total();
        if total > 0.0 && total.is_finite() {
            for a in self.atoms.iter_mut() {
                a.1 /= total;
            }
            if let Some(g) = self.grid.as_mut() {
                g.scale(1.0 / total);
            }
            self.log_scale += total.ln();
        }
        self
    }

    /// Multiplies every mass by `e^{log_factor}`.
    pub fn scaled(mut self, log_factor: f64) -> Self {
        self.log_scale += log_factor;
        if let Some(cf) = self.closed_form.take() {
            self.closed_form = Some(Arc::new(move |lam| cf(lam).map(|v| v + log_factor)));
        }
        self
    }

    /// Reference point for exponentials in the grid sum.
    fn s_ref(&self) -> f64 {
        match (&self.grid, self.atoms.first()) {
            (Some(g), _) if g.len() > 0 => g.s(g.len() / 2),
            (_, Some(a)) => a.0,
            _ => 0.0,
        }
    }

    /// `ln ∫ t^λ dμ` from atoms and grid.
    pub fn log_mellin_numeric(&self, lambda: Complex64) -> Complex64 {
        let s_ref = self.s_ref();
        let mut terms: Vec<Complex64> = self
            .atoms
            .iter()
            .map(|&(s, w)| (lambda * (s - s_ref)).exp() * w)
            .collect();
        if let Some(g) = &self.grid {
            terms.push(g.mellin_sum(lambda, s_ref));
        }
        pairwise_sum(&terms).ln() + lambda * s_ref + self.log_scale
    }

    /// `∫ t^λ dμ` from atoms and grid, ignoring any closed form.
    pub fn mellin_numeric(&self, lambda: Complex64) -> Complex64 {
        self.log_mellin_numeric(lambda).exp()
    }

    /// `ln ∫ t^λ dμ` from the attached closed form, if any.
    pub fn log_mellin_closed(&self, lambda: Complex64) -> Option<Result<Complex64>> {
        self.closed_form.as_ref().map(|cf| cf(lambda))
    }

    pub fn mellin_closed(&self, lambda: Complex64) -> Option<Result<Complex64>> {
        self.log_mellin_closed(lambda)
            .map(|r| r.map(Complex64::exp))
    }

    fn combined_closed_form(&self, other: &RxMeasure) -> Option<MellinFn> {
        let (a, b) = (self.closed_form.clone()?, other.closed_form.clone()?);
        Some(Arc::new(move |lam| Ok(a(lam)? + b(lam)?)))
    }

    pub fn to_doc(&self) -> MeasureDoc {
        let grid = self.grid.as_ref().filter(|g| g.len() > 0).map(|g| {
            let k = (g.len() as f64).log2().ceil().max(1.0) as u32;
            let padded = 1usize << k;
            let scale = self.log_scale.exp() / g.step();
            let mut values: Vec<f64> = g.weights().iter().map(|w| w * scale).collect();
            values.resize(padded, 0.0);
            let half = (padded / 2) as f64 * g.step();
            GridDoc {
                half_width: half,
                k,
                offset: g.origin() + half,
                step: g.step(),
                values,
            }
        });
        MeasureDoc {
            atoms: self.atoms().into_iter().map(|(t, m)| [t, m]).collect(),
            grid,
        }
    }

    pub fn from_doc(doc: &MeasureDoc) -> Result<Self> {
        let mut atoms = Vec::with_capacity(doc.atoms.len());
        for &[t, mass] in &doc.atoms {
            if !(t > 0.0) || !(mass >= 0.0) {
                return Err(Error::InvalidParameter(format!("atom [{t}, {mass}]")));
            }
            atoms.push((t.ln(), mass));
        }
        let grid = match &doc.grid {
            None => None,
            Some(g) => {
                if g.values.len() != 1usize << g.k || !(g.step > 0.0) {
                    return Err(Error::InvalidParameter(
                        "grid shape does not match k".into(),
                    ));
                }
                if g.values.iter().any(|v| !(*v >= 0.0)) {
                    return Err(Error::InvalidParameter("negative density value".into()));
                }
                let origin = g.offset - (g.values.len() / 2) as f64 * g.step;
                let mut grid = LogGrid::new(
                    origin,
                    g.step,
                    g.values.iter().map(|v| v * g.step).collect(),
                );
                grid.trim();
                Some(grid)
            }
        };
        Ok(Self {
            log_scale: 0.0,
            atoms,
            grid,
            closed_form: None,
        }
        .normalized())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_doc())?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_doc(&serde_json::from_str(s)?)
    }

    /// CSV with columns `kind,s,t,value`: atom rows carry the mass, density
    /// rows the density per unit `s`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "kind,s,t,value")?;
        for (t, mass) in self.atoms() {
            writeln!(out, "atom,{:e},{:e},{:e}", t.ln(), t, mass)?;
        }
        for (s, d) in self.density() {
            writeln!(out, "density,{:e},{:e},{:e}", s, s.exp(), d)?;
        }
        Ok(())
    }
}

/// JSON form of a measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub atoms: Vec<[f64; 2]>,
    pub grid: Option<GridDoc>,
}

/// Density values at `s_i = offset + (i − 2^{k−1})·step`, `i < 2^k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDoc {
    #[serde(rename = "L")]
    pub half_width: f64,
    pub k: u32,
    pub offset: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

/// `∫ t^λ dμ`. When a closed form is attached it is returned after a check
/// against the grid sum.
pub fn mellin(mu: &RxMeasure, lambda: Complex64) -> Result<Complex64> {
    log_mellin(mu, lambda).map(Complex64::exp)
}

/// `ln ∫ t^λ dμ`, principal branch of the logarithm.
pub fn log_mellin(mu: &RxMeasure, lambda: Complex64) -> Result<Complex64> {
    warn_outside_strip(lambda);
    let numeric = mu.log_mellin_numeric(lambda);
    match mu.log_mellin_closed(lambda) {
        None => Ok(numeric),
        Some(exact) => {
            let exact = exact?;
            check_closed_form(numeric, exact, lambda)?;
            Ok(exact)
        }
    }
}

fn check_closed_form(
    log_numeric: Complex64,
    log_exact: Complex64,
    lambda: Complex64,
) -> Result<()> {
    let rel = ((log_numeric - log_exact).exp() - 1.0).norm();
    if !(rel <= CLOSED_FORM_TOLERANCE) {
        return Err(Error::InternalInconsistency(format!(
            "closed-form Mellin exp({log_exact}) vs grid exp({log_numeric}) at λ = {lambda} (relative {rel:e})"
        )));
    }
    Ok(())
}

/// Multiplicative convolution `μ ∗ ν`.
pub fn convolve(mu: &RxMeasure, nu: &RxMeasure) -> Result<RxMeasure> {
    let mut atoms = Vec::with_capacity(mu.atoms.len() * nu.atoms.len());
    for &(sa, wa) in &mu.atoms {
        for &(sb, wb) in &nu.atoms {
            atoms.push((sa + sb, wa * wb));
        }
    }
    let mut parts: Vec<LogGrid> = Vec::new();
    if let (Some(a), Some(b)) = (&mu.grid, &nu.grid) {
        parts.push(a.convolve(b));
    }
    for (grid, others) in [(&mu.grid, &nu.atoms), (&nu.grid, &mu.atoms)] {
        if let Some(g) = grid {
            for &(s, w) in others {
                let mut shifted = g.clone();
                shifted.shift(s);
                shifted.scale(w);
                parts.push(shifted);
            }
        }
    }
    let grid = match parts.len() {
        0 => None,
        _ => {
            let mut iter = parts.into_iter();
            let mut acc = iter.next().expect("nonempty");
            for p in iter {
                acc.accumulate(&p, 0.0, 1.0);
            }
            acc.trim();
            acc.check_width()?;
            Some(acc)
        }
    };
    let out = RxMeasure {
        log_scale: mu.log_scale + nu.log_scale,
        atoms,
        grid,
        closed_form: None,
    }
    .normalized();
    match mu.combined_closed_form(nu) {
        Some(cf) => out.with_closed_form(cf),
        None => Ok(out),
    }
}
