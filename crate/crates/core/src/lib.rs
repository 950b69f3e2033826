pub mod ilsr;
pub mod lab;
pub mod linalg;
pub mod lsr;
pub mod net;
pub mod opt;
pub mod residual;
