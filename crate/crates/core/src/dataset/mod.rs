// SPDX-License-Identifier: Apache-2.0

//! Process logs: CSV ingestion, the synthetic traffic-light generator and
//! the fixed train/test layout.

mod csv_io;
mod matrix;
mod sim;

pub use csv_io::{load_csv, read_csv, write_csv, write_csv_to, LABEL_COLUMN};
pub use matrix::{FeatureMatrix, Label, LabeledSet, Scenario};
pub use sim::{
    check_row, make_paper_splits, paper_test_specs, simulate_tlight, CycleLayout, PaperSplits,
    RowCheck, SimConfig, TestSetSpec, DEFAULT_CYCLE_TICKS, FEATURE_NAMES, SIGNAL_MIX, TIMING_MIX, TRAIN_RECORDS,
};
