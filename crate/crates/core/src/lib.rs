//! Ehrenfeucht–Fraïssé games on generalized words and a checker for
//! identities between π-terms over fragments of first-order logic.

pub mod engine;
pub mod fragments;
pub mod genword;
pub mod identity;
pub mod oracle;
pub mod pi_term;
