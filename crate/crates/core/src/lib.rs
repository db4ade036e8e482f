pub mod attention;
pub mod cli;
pub mod layout;
pub mod memsim;
pub mod wgmma_map;

#[cfg(test)]
mod testing;
