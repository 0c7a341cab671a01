pub mod csr;
pub mod lu;
pub mod mat2;

pub use csr::{CsrMatrix, TripletBuilder};
pub use lu::{BandLu, DirectSolver};
pub use mat2::Mat2;
