//! Material models, the energy/pseudo-time map, the inflow beam, CT density
//! mapping and dose accumulation.

mod beam;
mod ct;
mod dose;
mod energy;

pub use beam::BeamModel;
pub use ct::{ct_to_density, parse_density_csv, parse_pgm, GrayImage, RHO_BONE, RHO_MIN};
pub use dose::DoseGrid;
pub use energy::{
    inverse_transform_density, transform_density, CrossSectionModel, EnergyFunction,
};
