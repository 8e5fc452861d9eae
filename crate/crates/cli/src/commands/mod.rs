mod collect;
mod extract;
mod fuse;
mod report;
mod simulate;
mod train;

pub use collect::{collect, CollectArgs};
pub use extract::{extract, ExtractArgs};
pub use fuse::{fuse, FuseArgs};
pub use report::{report, ReportArgs};
pub use simulate::{simulate, SimulateArgs};
pub use train::{train, TrainArgs};

use std::path::Path;

use timefuse::meta_dataset::{read_shard, MetaShard};

use crate::error::{AtPath, CliResult};

fn load_shards(paths: &[impl AsRef<Path>]) -> CliResult<Vec<MetaShard>> {
    paths
        .iter()
        .map(|p| read_shard(p.as_ref()).at(p.as_ref()))
        .collect()
}
