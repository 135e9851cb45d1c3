//! Trust evaluation for network slices built from virtual network functions.

pub mod authority;
pub mod cli;
pub mod credentials;
pub mod lopat;
pub mod nfvsim;
pub mod policyrepo;
pub mod resolution;
pub mod trustmgr;
