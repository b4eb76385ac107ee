pub mod bounds;
pub mod measures;
pub mod numerics;
pub mod polyring;
pub mod pushforward;
