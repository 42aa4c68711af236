pub mod acq;
pub mod ctrl;
pub mod env;
pub mod gp;
pub mod opt;
pub mod optim;
pub mod qp;
