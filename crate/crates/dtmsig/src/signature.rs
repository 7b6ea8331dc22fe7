//! DTM-signatures: the distribution of the distance-to-measure function
//! under the measure itself, in full-sample and subsampled forms.

use rayon::prelude::*;

use crate::dtm::{dtm_field, DtmEvaluator, QueryPoint};
use crate::error::{Error, Result};
use crate::space::{FiniteMeasureSpace, SubsampleIndex};
use crate::wasserstein::Discrete1D;

/// The distribution of DTM values over an evaluation measure.
#[derive(Debug, Clone)]
pub struct Signature1D {
    dist: Discrete1D,
    mass: f64,
    source_size: usize,
    eval_size: usize,
}

impl Signature1D {
    pub fn dist(&self) -> &Discrete1D {
        &self.dist
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Support size of the measure the DTM was computed against.
    pub fn source_size(&self) -> usize {
        self.source_size
    }

    /// Number of evaluation points behind the signature atoms.
    pub fn eval_size(&self) -> usize {
        self.eval_size
    }

    /// Expected DTM value under the evaluation measure.
    pub fn mean(&self) -> f64 {
        self.dist.mean()
    }
}

/// Signature of the space's own measure: DTM at every support point,
/// weighted by the point weights.
pub fn signature_full(space: &FiniteMeasureSpace, m: f64) -> Result<Signature1D> {
    let field = dtm_field(space, m)?;
    let dist = Discrete1D::new(field.values().to_vec(), space.weights().to_vec())?;
    Ok(Signature1D {
        dist,
        mass: m,
        source_size: space.len(),
        eval_size: space.len(),
    })
}

/// Subsampled signature: DTM computed against the *full* measure, evaluated
/// only at the subsample points, each carrying weight `1/n`.
pub fn signature_subsample(
    space: &FiniteMeasureSpace,
    sub: &SubsampleIndex,
    m: f64,
) -> Result<Signature1D> {
    if sub.parent_len() != space.len() {
        return Err(Error::InvalidSubsample(format!(
            "subsample of a space of size {}, got space of size {}",
            sub.parent_len(),
            space.len()
        )));
    }
    if sub.is_empty() {
        return Err(Error::InvalidSubsample("empty subsample".into()));
    }
    let eval = DtmEvaluator::new(space);
    let values = sub
        .indices()
        .par_iter()
        .map(|&i| eval.dtm_at(QueryPoint::Index(i), m))
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len();
    let dist = Discrete1D::from_uniform(&values)?;
    Ok(Signature1D {
        dist,
        mass: m,
        source_size: space.len(),
        eval_size: n,
    })
}
