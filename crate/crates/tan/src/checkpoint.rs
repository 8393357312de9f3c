//! Parameter checkpoints: a JSON object mapping layer name to shape and
//! values. Floats are written in shortest round-trip form, so a load
//! restores every parameter bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use tan_core::networks::{AdaptorParams, Dense, Mlp, NetworkParams, NetworkSpecs};
use tan_core::Tensor;

use crate::error::{Result, TanError};
use crate::io;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Layer name (`phi.0.weight`, `theta.2.bias`, …) to parameters.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub layers: BTreeMap<String, LayerEntry>,
}

const NETS: [&str; 4] = ["phi", "psi", "omega", "theta"];

impl Checkpoint {
    pub fn from_params(params: &NetworkParams, adaptor: &AdaptorParams) -> Self {
        let mut layers = BTreeMap::new();
        for (net, mlp) in NETS.iter().zip([&params.phi, &params.psi, &params.omega, &adaptor.theta]) {
            for (name, t) in mlp.named_tensors() {
                layers.insert(
                    format!("{net}.{name}"),
                    LayerEntry {
                        shape: t.shape().to_vec(),
                        values: t.data().to_vec(),
                    },
                );
            }
        }
        Checkpoint { layers }
    }

    fn tensor(&self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let e = self
            .layers
            .get(name)
            .ok_or_else(|| TanError::Config(format!("checkpoint lacks layer {name}")))?;
        if e.shape != shape {
            return Err(TanError::Config(format!(
                "checkpoint layer {name} has shape {:?}, expected {shape:?}",
                e.shape
            )));
        }
        Ok(Tensor::new(e.shape.clone(), e.values.clone())?)
    }

    fn mlp(&self, net: &str, spec: &tan_core::networks::MlpSpec) -> Result<Mlp> {
        let layers = spec
            .layer_widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                Ok(Dense {
                    weight: self.tensor(&format!("{net}.{i}.weight"), &[w[0], w[1]])?,
                    bias: self.tensor(&format!("{net}.{i}.bias"), &[1, w[1]])?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Mlp {
            spec: spec.clone(),
            layers,
        })
    }

    /// Rebuilds the networks, checking every layer against `specs`.
    pub fn to_params(&self, specs: &NetworkSpecs) -> Result<(NetworkParams, AdaptorParams)> {
        let expected: usize = [&specs.feature, &specs.classifier, &specs.discriminator, &specs.adaptor]
            .iter()
            .map(|s| 2 * (s.layer_widths.len() - 1))
            .sum();
        if self.layers.len() != expected {
            return Err(TanError::Config(format!(
                "checkpoint has {} layers, the network has {expected}",
                self.layers.len()
            )));
        }
        Ok((
            NetworkParams {
                phi: self.mlp("phi", &specs.feature)?,
                psi: self.mlp("psi", &specs.classifier)?,
                omega: self.mlp("omega", &specs.discriminator)?,
            },
            AdaptorParams {
                theta: self.mlp("theta", &specs.adaptor)?,
            },
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_json(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tan_core::networks::init_networks;

    #[test]
    fn round_trip_is_bit_exact() {
        let specs = NetworkSpecs::default_for(2, 2, 35);
        let (params, adaptor) = init_networks(&specs, 11).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ckpt.json");
        Checkpoint::from_params(&params, &adaptor).save(&p).unwrap();
        let (p2, a2) = Checkpoint::load(&p).unwrap().to_params(&specs).unwrap();
        assert_eq!(p2, params);
        assert_eq!(a2, adaptor);
        for (x, y) in p2.tensors().zip(params.tensors()) {
            assert!(x.data().iter().zip(y.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn wrong_shape_is_rejected() {
        let specs = NetworkSpecs::default_for(2, 2, 35);
        let (params, adaptor) = init_networks(&specs, 1).unwrap();
        let ck = Checkpoint::from_params(&params, &adaptor);
        assert!(ck.to_params(&NetworkSpecs::default_for(3, 2, 35)).is_err());
    }

    #[test]
    fn names_are_prefixed_by_network() {
        let specs = NetworkSpecs::default_for(2, 2, 35);
        let (params, adaptor) = init_networks(&specs, 1).unwrap();
        let ck = Checkpoint::from_params(&params, &adaptor);
        assert!(ck.layers.contains_key("phi.0.weight"));
        assert!(ck.layers.contains_key("theta.2.bias"));
        assert_eq!(ck.layers["psi.0.bias"].shape, vec![1, 2]);
    }
}
