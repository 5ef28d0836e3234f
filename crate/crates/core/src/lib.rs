pub mod cli;
pub mod cutjoin;
pub mod error;
pub mod oracle;
pub mod series;
pub mod spectra;
pub mod tracer;
