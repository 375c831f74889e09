pub mod conic;
pub mod encoding;
pub mod error;
pub mod linalg;
pub mod model;
pub mod search;
pub mod worstcase;
pub mod outage;
pub mod random;
pub mod baseline;
pub mod sensing;
