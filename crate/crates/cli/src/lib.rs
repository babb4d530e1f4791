//! Command-line front end for `mcsched-core`: task-set documents, JSON
//! reports, CSV traces and SVG Gantt charts.

pub mod cli;
pub mod document;
pub mod gantt;
pub mod report;
pub mod trace_csv;
