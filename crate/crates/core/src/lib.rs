pub mod algebra;
pub mod band;
pub mod cli;
pub mod frame;
pub mod numeric;
pub mod poly;
pub mod repr;
pub mod spectra;
