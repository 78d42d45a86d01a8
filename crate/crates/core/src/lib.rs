pub mod eval;
pub mod evidence;
pub mod grounding;
pub mod inference;
pub mod learning;
pub mod logic;
pub mod model;
pub mod scalar;
pub mod taxonomy;

pub use scalar::{Real, Truth};

pub type Mln = model::Mln<f64>;
pub type GroundMrf = grounding::GroundMrf<f64>;
pub type World = logic::World<f64>;
pub type Weight = model::Weight<f64>;
pub type TrainConfig = learning::TrainConfig<f64>;
