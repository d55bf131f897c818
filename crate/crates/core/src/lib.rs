pub mod error;
pub mod quadrature;
pub mod spectral;
pub mod response;
pub mod correlations;
pub mod quantifiers;
pub mod oracle;
