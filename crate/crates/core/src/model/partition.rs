use crate::cluster::{kmeans, Encoder, Feature, KmeansFit, KmeansOptions};
use crate::error::{Error, Result};
use crate::frame::DataFrame;

use super::{encode_inputs, FieldValues, InputField, Predictions, Predictor};

/// Nearest-centroid assignment from a k-means fit on standardized, one-hot
/// encoded inputs.
#[derive(Debug)]
pub(crate) struct ClusterModel {
    schema: Vec<InputField>,
    encoder: Encoder,
    fit: KmeansFit,
}

fn features<'a>(schema: &[InputField], inputs: &'a [FieldValues<'a>]) -> Vec<Feature<'a>> {
    inputs
        .iter()
        .zip(schema)
        .map(|(v, field)| match v {
            FieldValues::Num(x) => Feature::Num(x),
            FieldValues::Cat(c) => Feature::Cat { codes: c, levels: field.levels.as_ref().map_or(0, Vec::len) },
        })
        .collect()
}

impl ClusterModel {
    pub(crate) fn fit(schema: &[InputField], inputs: &[FieldValues<'_>], k: usize, seed: u64) -> Result<Self> {
        let n = match inputs.first() {
            Some(FieldValues::Num(x)) => x.len(),
            Some(FieldValues::Cat(c)) => c.len(),
            None => return Err(Error::EmptyInput),
        };
        let feats = features(schema, inputs);
        let encoder = Encoder::fit(&feats);
        if encoder.dim() == 0 {
            return Err(Error::AllConstant);
        }
        let points = encoder.encode(&feats, n);
        let fit = kmeans(&points, encoder.dim(), k, seed, KmeansOptions::default())?;
        Ok(ClusterModel { schema: schema.to_vec(), encoder, fit })
    }
}

impl Predictor for ClusterModel {
    fn predict(&self, rows: &DataFrame) -> Result<Predictions> {
        let inputs = encode_inputs(&self.schema, rows)?;
        let points = self.encoder.encode(&features(&self.schema, &inputs), rows.nrows());
        let ids = points.chunks_exact(self.encoder.dim()).map(|p| self.fit.nearest(p) as u32).collect();
        Ok(Predictions::ClusterId { ids })
    }
}
