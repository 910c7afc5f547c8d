//! Policy synthesis: replay buffers, DDPG/TD3 actor-critic updates and the
//! episode loop, plus the degeneracy checks that motivate selective
//! buffering.

pub mod buffer;
pub mod degeneracy;
pub mod policy;
pub mod train;

pub use buffer::{selective_insert, Experience, ReplayBuffer, SelectiveWindow};
pub use degeneracy::{
    check_degeneracy_implication, detect_buffer_degeneracy, detect_instance_degeneracy, DegeneracyReport, ScalarSetup,
};
pub use policy::{ActorCriticPolicy, Algorithm, PolicyConfig, Targets};
pub use train::{explain, synthesize_policy, synthesize_policy_with_observer, LearningCurve, TrainConfig, UpdateEvent, CURVE_WINDOW};
