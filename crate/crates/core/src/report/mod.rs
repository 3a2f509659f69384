//! Second pass: aggregate statistics and their table renderings.

pub mod render;
pub mod stats;

pub use render::{build_matrix, layouts_for, render_report, Document, Format, Layout, MatrixTable, LAYOUTS};
pub use stats::{aggregate_stats, AggregateStats, Flow, KnowledgeRow, PasteboardEntry, StatsInput};
