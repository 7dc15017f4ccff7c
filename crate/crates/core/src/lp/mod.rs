//! Littlewood-Paley blocks, dyadic Sobolev norms, paraproducts with a
//! parameter and the symbol `alpha`.

mod dyadic;
mod grid;
mod paradiff;
mod positivity;
mod selftest;
mod symbol;

pub use dyadic::{block, chi, chi_j, dyadic_sobolev_norm, phi_j, sobolev_norm, DyadicDecomposition};
pub use grid::{Grid, SpectralField};
pub use paradiff::{paraproduct, FnSymbol, Paraproduct, ParaproductKernels, SpatialSymbol, Symbol};
pub use positivity::{find_gamma0, positivity_quotients, GammaSearch, PositivityQuotients, Probe};
pub use selftest::{lp_selftest, SelfTestReport};
pub use symbol::{alpha_symbol, symbol_value, SnapshotSymbol, SymbolEvaluator, SymbolKind, SymbolSnapshot};
