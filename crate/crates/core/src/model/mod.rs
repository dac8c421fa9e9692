//! Domain, grid and swimmer geometry, with the configuration validity checks.

mod domain;
mod mask;
mod shape;
mod swimmer;
mod thickness;

pub use domain::{DomainSpec, Grid, MIN_CELLS};
pub use mask::{characteristic_mask, check_inside, BodyMask};
pub use shape::{ball_box_volume, disc_rect_area, BodyShape};
pub use swimmer::{
    margins, validate_configuration, ControlKind, ControlVector, MarginReport, Swimmer, SwimmerState,
};
pub use thickness::{h2_thickness_constant, ShiftThickness, ThicknessReport};
