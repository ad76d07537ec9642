pub mod analysis;
pub mod config;
pub mod error;
pub mod grid;
pub mod lbfgs;
pub mod linear;
pub mod loading;
pub mod scheme;
pub mod material;
pub mod norms;
pub mod output;
pub mod tensor;
