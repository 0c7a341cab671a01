//! Harmonic extension of the interface displacement, the flow map, and the
//! pullback fields with their directional derivatives.

mod derivatives;
mod extension;
mod fields;

pub use derivatives::{max_cofactor_divergence, transform_derivatives, QpDerivative, TransformDerivatives};
pub use extension::{
    flow_map, harmonic_extension, interface_nodes, transform_fields, HarmonicExtension, InterfaceTrace,
};
pub use fields::{ElementQuality, QpTransform, TransformFields, ELLIPTICITY_FLOOR};
