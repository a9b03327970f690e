pub mod bounds;
pub mod cli;
pub mod error;
pub mod exactprob;
pub mod harness;
pub mod oracle;
pub mod params;
pub mod precreal;
pub mod radical;
pub mod solver;
