pub mod counts;
pub mod fit;
pub mod spectrum;
pub mod traces;

use std::path::{Path, PathBuf};

use crate::output::Output;

pub struct Context {
    pub seed: u64,
    pub out: Output,
    /// Relative data paths in the config resolve against this directory.
    pub base_dir: PathBuf,
}

impl Context {
    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}
