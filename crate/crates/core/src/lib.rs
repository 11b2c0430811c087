pub mod angular;
pub mod checks;
pub mod criteria;
pub mod exec;
pub mod fdtd;
pub mod scenario;
pub mod series;
pub mod spectral;
pub mod thermal;
