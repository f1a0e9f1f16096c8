pub mod discretize;
pub mod exec;
pub mod integrate;
pub mod io;
pub mod legendre;
pub mod method;
pub mod verify;
