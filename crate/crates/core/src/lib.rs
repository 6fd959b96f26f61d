pub mod bounds;
pub mod conelab;
pub mod error;
pub mod iterate;
pub mod linalg;
pub mod mtx;
pub mod pencil;
pub mod precond;
pub mod problem;
