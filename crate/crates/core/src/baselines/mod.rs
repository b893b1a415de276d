pub mod als;
pub mod esprit;
pub mod identifiability;
