//! Polynomial operators and their upper and lower symbols.

mod operator;
mod parse;
mod symbol;

pub use operator::{LadderMonomial, PolynomialOperator};
pub(crate) use operator::{binomial, factorial};
pub use parse::{parse_operator, parse_term, ParseError};
pub use symbol::{
    lower_symbol, symbol_gap, upper_from_lower, upper_symbol, upper_symbol_fn, SmoothedSymbol, SymbolFn,
    SymbolKind, SymbolMonomial, BOUNDARY_TOLERANCE,
};
