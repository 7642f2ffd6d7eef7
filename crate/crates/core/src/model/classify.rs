use super::network::{Network, SiteClasses};
use super::validate::validate;
use super::ModelError;

/// Partitions the sites into In(N), Out(N) and Mid(N).
///
/// A site that no channel touches is reported as an input only.
pub fn classify_sites(network: &Network) -> Result<SiteClasses, ModelError> {
    let report = validate(network);
    if !report.is_valid() {
        return Err(ModelError::Invalid(report));
    }
    Ok(network.classes_unchecked())
}
