//! Experiment world: ground truth, base-station deployment and link visibility.

mod connectivity;
mod deploy;
mod schedule;
mod trajectory;
mod visibility;

pub use connectivity::{connectivity_stats, link_state_totals, los_counts, ConnectivityStats, OutageSegment};
pub use deploy::{deploy_bs, BsSite, DeployError, Polyline};
pub use schedule::{build_schedule, RandomNlos};
pub use trajectory::{downtown_tour, local_delta, Maneuver, ManeuverWindow, TrackSpec, Trajectory, TrajectoryEpoch, TrajectoryError};
pub use visibility::{visibility, Building, LinkState, ScheduleWindow, VisibilityError, VisibilityMode, VisibilityModel};
