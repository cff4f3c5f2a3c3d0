//! Body forces given in closed form, projected onto the reduced basis.

use crate::forms;
use crate::geometry::ReducedSpace;

/// Width of the boundary layer relative to the domain height.
const LAYER_WIDTH: f64 = 0.1;

/// Named forcing fields. Positions are rescaled to the unit box spanned by
/// the mesh, so the same field fits channels and squares.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Forcing {
    Constant { fx: f64, fy: f64 },
    /// Rigid rotation about the box center.
    Vortex { amplitude: f64 },
    /// `(sin πη, 0)`
    Shear { amplitude: f64 },
    /// Plug profile vanishing at the top and bottom walls.
    BoundaryLayer { amplitude: f64 },
}

impl Forcing {
    pub fn name(&self) -> &'static str {
        match self {
            Forcing::Constant { .. } => "constant",
            Forcing::Vortex { .. } => "vortex",
            Forcing::Shear { .. } => "shear",
            Forcing::BoundaryLayer { .. } => "boundary_layer",
        }
    }

    /// Value at box coordinates `(ξ, η) ∈ [0, 1]²`.
    pub fn at_unit(&self, xi: f64, eta: f64) -> [f64; 2] {
        use std::f64::consts::PI;
        match *self {
            Forcing::Constant { fx, fy } => [fx, fy],
            Forcing::Vortex { amplitude } => [-amplitude * (eta - 0.5), amplitude * (xi - 0.5)],
            Forcing::Shear { amplitude } => [amplitude * (PI * eta).sin(), 0.0],
            Forcing::BoundaryLayer { amplitude } => {
                let p = (1.0 - (-eta / LAYER_WIDTH).exp()) * (1.0 - (-(1.0 - eta) / LAYER_WIDTH).exp());
                [amplitude * p, 0.0]
            }
        }
    }

    /// Load vector `(∫ f·φᵢ)ᵢ` over the reduced basis.
    pub fn load(&self, space: &ReducedSpace) -> Vec<f64> {
        let verts = space.mesh().vertices();
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for v in verts {
            for c in 0..2 {
                lo[c] = lo[c].min(v[c]);
                hi[c] = hi[c].max(v[c]);
            }
        }
        let (wx, wy) = (hi[0] - lo[0], hi[1] - lo[1]);
        forms::load_vector(space, |x, y| self.at_unit((x - lo[0]) / wx, (y - lo[1]) / wy))
    }
}
