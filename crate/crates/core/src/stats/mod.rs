//! Distribution functions, the Q-statistic tests, covariance estimation and
//! ROC analysis.

mod chi2;
mod covariance;
mod library;
mod qtest;
mod roc;
mod summary;

pub use chi2::{chi2_cdf, chi2_pdf, chi2_quantile, chi2_sf, chi2_upper_quantile, ln_gamma};
pub use covariance::{experimental_covariance, mean_vector};
pub use library::{
    detect, identify, CovarianceSource, DeltaCovariance, HypothesisScore, Identification,
    IdentificationCovariance, LibraryOptions, ReductionSpec, StateLibrary, StateModel, UNIDENTIFIED,
};
pub use qtest::{quadratic_form, q_statistic, Decision, QTest, QValue, RiskSpec, SingularPolicy, PINV_FLOOR};
pub use roc::{roc, write_roc_csv, RocCurve, Sweep};
pub use summary::{
    summarize, write_confusion_csv, ConfusionTable, IdentificationRow, InspectionOutcome, Ratio,
    StateRatio, TableKey,
};
