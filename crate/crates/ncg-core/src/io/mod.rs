//! JSON bundles and DOT rendering.

mod bundle;
mod dot;

pub use bundle::{load_bundle, save_bundle, Bundle, LiftEntry, FORMAT_VERSION};
pub use dot::{render_arrow, render_diagram, render_lift};
