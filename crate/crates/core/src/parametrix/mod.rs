//! Overdetermined divergence-form systems on periodic charts and their Fourier parametrix.

pub mod local;
pub mod multiplier;
pub mod system;

pub use local::{
    local_representation, neumann_solve, probe_contraction, random_band_limited, LocalOperators, LocalRepresentation,
    NeumannReport,
};
pub use multiplier::{apply_multiplier, smooth_step, CutoffSpec, LatticeMultiplier, MultiplierKernel, PsiMultiplier};
pub use system::{check_ellipticity, CoefficientFn, DivergenceSystem, SymbolMatrix};

use crate::error::Result;
use crate::field::Field;
use crate::scalar::Real;

/// `sup |v − E P v − ψ(D) v| / sup |v|` for the system frozen at `x₀`, on the chart of `v`.
pub fn representation_identity_check<T: Real>(sys: &DivergenceSystem<T>, x0: &[T], v: &Field<T>, cutoffs: CutoffSpec) -> Result<T> {
    let sym = sys.symbol(x0);
    let kernel = MultiplierKernel::new(&sym, v.chart(), cutoffs)?;
    let pv = apply_multiplier(&sym, v)?;
    let epv = apply_multiplier(&kernel, &pv)?;
    let psiv = apply_multiplier(&PsiMultiplier { cutoffs, dim: v.ncomp() }, v)?;
    let mut worst = T::zero();
    let mut scale = T::zero();
    let n = v.ncomp();
    for k in 0..v.chart().len() {
        for c in 0..n {
            let a = v.get(k, c);
            scale = scale.max(a.abs());
            worst = worst.max((a - epv.get(k, c) - psiv.get(k, c)).abs());
        }
    }
    Ok(if scale > T::zero() { worst / scale } else { worst })
}
