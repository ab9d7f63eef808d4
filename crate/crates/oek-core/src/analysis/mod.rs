//! Evidence machinery: happens-before analysis, race detection,
//! observational equivalence, exhaustive interleaving exploration, and
//! the sequentially-sound optimizer.

mod equiv;
mod explore;
mod hb;
mod optimize;
mod races;

pub use equiv::{equivalent, EquivMode, EquivResult};
pub use explore::{explore, explore_with, ExploreBounds, ExploreConfig, ExplorationReport, ScheduleRecord};
pub use hb::{happens_before, AnalysisError, VectorClock};
pub use optimize::{optimize_rle, OptimizeResult};
pub use races::{detect_races, AccessInfo, AccessKind, Race};
