pub mod cloudkit;
pub mod descriptors;
pub mod adapt;
pub mod classify;
pub mod synthlab;
pub mod pipeline;
