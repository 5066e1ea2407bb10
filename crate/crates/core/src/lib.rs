//! Heat, Poisson and Riesz kernels on the homogeneous tree `T_{q+1}` with the flow
//! measure `mu(x) = q^{l(x)}`, together with the maximal operators, atoms and BMO
//! witness used to compare Hardy spaces numerically.

pub mod bessel;
pub mod error;
pub mod flow;
pub mod hardy;
pub mod optim;
pub mod oracles;
pub mod output;
pub mod quad;
pub mod radial;
pub mod scalar;
pub mod sum;
pub mod tree;
pub mod verify;

pub use error::{Result, TreeError};
pub use flow::{FinSuppFn, KernelQuery, Kernels, TGridPolicy};
pub use scalar::SupResult;
pub use tree::{FlowWeight, Trapezoid, Tree, Vertex};
