//! Random instance generators, independent oracles and seeded check suites
//! for `pcis-core`.

pub mod gen;
pub mod oracle;
pub mod suites;

pub use suites::SuiteReport;
