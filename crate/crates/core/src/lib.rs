pub mod assemble;
pub mod bag;
pub mod calib;
pub mod codec;
pub mod fixtures;
pub mod geom;
pub mod model;
