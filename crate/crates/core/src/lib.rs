pub mod geometry;
pub mod scene;
pub mod grasp;
pub mod push_sim;
pub mod planner;
pub mod bench;
