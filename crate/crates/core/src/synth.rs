//! Synthetic surfaces: exact validation shapes (sphere, cylinder, grids)
//! and the papillae-like generators used to exercise the whole pipeline in
//! place of private scan data.

pub mod gen;
pub mod shapes;
