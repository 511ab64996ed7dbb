//! Domain types: spins, cavity, ensembles and coupling densities.

mod density;
mod ensemble;
mod moments;
mod sampling;
mod tabulated;

pub use density::{convolve_homogeneous, CouplingDensity, Profile};
pub use ensemble::{build_ensemble, merge_degenerate, CavitySpec, Ensemble, SpinSpec};
pub use moments::{moment_set, Moment, MomentSet};
pub use sampling::{sample_ensemble, SamplingScheme};
pub use tabulated::TabulatedDensity;

/// Complex numbers travel as `[re, im]`; a bare number is read as real.
pub(crate) mod complex_serde {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Real(f64),
        Pair([f64; 2]),
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        [z.re, z.im].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        Ok(match Repr::deserialize(d)? {
            Repr::Real(x) => Complex64::new(x, 0.0),
            Repr::Pair([re, im]) => Complex64::new(re, im),
        })
    }
}
