pub mod diffalg;
pub mod lambda;
pub mod ore;
pub mod parse;
pub mod poly;
pub mod solve;
