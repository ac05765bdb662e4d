pub mod agents;
pub mod analysis;
pub mod formulations;
pub mod io;
pub mod lp;
pub mod model;
pub mod virtual_links;
