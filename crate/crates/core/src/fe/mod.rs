//! Reference elements, quadrature, isoparametric geometry and the
//! precomputed interpolation tables used by the residual.

pub mod geometry;
pub mod quadrature;
pub mod reference;
pub mod space;
pub mod tables;

pub use geometry::{face_measure, map_point, map_with, MappedPoint};
pub use quadrature::{facet_rule, gauss_legendre, volume_rule, QuadratureRule};
pub use reference::{BasisEval, ElementKind, ReferenceElement, ReferenceFace};
pub use space::FunctionSpace;
pub use tables::{QuadratureTables, SpaceTables};
