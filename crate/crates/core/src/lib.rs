pub mod corpus;
pub mod egraph;
pub mod embed;
pub mod expr;
pub mod grammar;
pub mod rules;
mod scalar;
mod serde_millis;

pub use scalar::Scalar;

pub type EmbeddingTable64 = embed::EmbeddingTable<f64>;
pub type EmbeddingTable32 = embed::EmbeddingTable<f32>;
pub type MistakeThreshold64 = embed::MistakeThreshold<f64>;
pub type MistakeThreshold32 = embed::MistakeThreshold<f32>;
