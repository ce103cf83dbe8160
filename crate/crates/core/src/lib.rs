pub mod emotion;
pub mod perception;
pub mod recommend;
pub mod rewards;
pub mod simulator;
pub mod socialgraph;
