//! Canonical desk-scale models shipped with the library.

use super::{parse_model, Model, ModelError};
use crate::real::Real;

/// Names resolvable by [`load`].
pub const MODEL_NAMES: &[&str] = &[
    "particle", "block", "pendulum", "fivebar", "hopper2d", "quad2d",
];

/// Model-file text for a canonical model.
pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "particle" => include_str!("../../models/particle.model"),
        "block" => include_str!("../../models/block.model"),
        "pendulum" => include_str!("../../models/pendulum.model"),
        "fivebar" => include_str!("../../models/fivebar.model"),
        "hopper2d" => include_str!("../../models/hopper2d.model"),
        "quad2d" => include_str!("../../models/quad2d.model"),
        _ => return None,
    })
}

/// Load a canonical model by name.
pub fn load<T: Real>(name: &str) -> Result<Model<T>, ModelError> {
    let text = source(name).ok_or_else(|| {
        ModelError::Validation(format!(
            "unknown model `{name}`; available: {}",
            MODEL_NAMES.join(", ")
        ))
    })?;
    parse_model(text, name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_canonical_model_loads() {
        for name in MODEL_NAMES {
            let m = load::<f64>(name).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(&m.name, name);
        }
    }

    #[test]
    fn expected_dimensions() {
        let particle = load::<f64>("particle").unwrap();
        assert_eq!(particle.nq(), 3);
        assert_eq!(particle.n_contacts(), 1);

        let fivebar = load::<f64>("fivebar").unwrap();
        assert_eq!(fivebar.nq(), 4);
        assert_eq!(fivebar.n_loop_rows(), 2);
        assert_eq!(fivebar.nu(), 2);

        let hopper = load::<f64>("hopper2d").unwrap();
        assert_eq!(hopper.nq(), 5);
        assert_eq!(hopper.nu(), 2);

        let quad = load::<f64>("quad2d").unwrap();
        assert_eq!(quad.nq(), 11);
        assert_eq!(quad.nu(), 8);
        assert_eq!(quad.n_contacts(), 4);
    }

    #[test]
    fn unknown_name_is_an_error() {
        assert!(load::<f64>("octopod").is_err());
    }
}
