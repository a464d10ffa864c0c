pub mod coupling;
pub mod dynamics;
pub mod field;
pub mod grid;
pub mod hermite;
pub mod io;
pub mod krylov;
pub mod observables;
pub mod oracle;
pub mod potential;
pub mod scenario;
pub mod simulation;
pub mod states;
