pub mod algebra;
pub mod catalog;
pub mod conditions;
pub mod ivp;
pub mod linsolve;
pub mod problem;
pub mod problems;
pub mod trajectory;
pub mod gradient;
pub mod optimize;
pub mod experiment;
pub mod cli;
pub mod config;
