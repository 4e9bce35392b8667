//! Dense real-valued grids with tape-based reverse-mode differentiation.
//!
//! A [`Tape`] records every primitive applied during a forward pass. Calling
//! [`Tape::backward`] on a scalar node walks the tape in reverse creation
//! order (which is a reverse topological order, since a node can only refer
//! to nodes created before it) and accumulates gradients into the
//! [`ParameterSet`] leaves that were marked trainable.
//!
//! ```
//! use tagan_autodiff::{ParameterSet, Tape, ValueGrid};
//!
//! let mut params = ParameterSet::<f64>::new();
//! let x = params.add("x", "demo", ValueGrid::from_vec(vec![3], vec![1.0, 2.0, 3.0]).unwrap());
//! let mut tape = Tape::new();
//! let xn = tape.param(&params, x);
//! let sq = tape.square(xn);
//! let loss = tape.sum(sq);
//! tape.backward(loss, &mut params).unwrap();
//! assert_eq!(params.grad(x).data(), &[2.0, 4.0, 6.0]);
//! ```

mod error;
mod gradcheck;
mod grid;
mod params;
mod real;
mod tape;

pub use error::AutodiffError;
pub use gradcheck::{gradient_check, GradCheckReport, ProbeResult};
pub use grid::ValueGrid;
pub use params::{ParamId, Parameter, ParameterSet};
pub use real::Real;
pub use tape::{Gradients, NodeId, Tape};

pub type Result<T> = std::result::Result<T, AutodiffError>;
