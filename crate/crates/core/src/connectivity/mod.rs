//! Pairwise connectivity estimators, electrode orderings and matrix assembly.

pub mod estimators;
pub mod matrix;
pub mod ordering;

pub use estimators::{pcc, phase_lag_sign, pli, plv};
pub use matrix::{
    connectivity_matrix, pair_table, pcc_table, pli_table, plv_table, write_matrix_csv, ConnectivityFeature,
    ConnectivityMatrix,
};
pub use ordering::{build_ordering, hemisphere_mask, mixed_window_count, CellClass, ElectrodeOrdering, OrderingMethod};
