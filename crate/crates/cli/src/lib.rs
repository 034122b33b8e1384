//! Command-line front-end for `spatassoc`.

pub mod app;
pub mod io;

pub use app::run;
