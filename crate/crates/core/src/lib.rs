#[global_allocator]
static ALLOC: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod cube;
pub mod oracle;
pub mod stats;
pub mod nn;
pub mod chasenet;
pub mod seed;
pub mod env;
pub mod actor;
pub mod harness;
