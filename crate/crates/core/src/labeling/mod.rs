//! Label transfer onto mesh vertices, region boundary extraction and
//! boundary smoothing.

mod boundary;
mod knn;
mod region;
mod smooth;

pub use boundary::{extract_region_boundary, BoundaryLoop, DEFAULT_MERGE_DIST};
pub use knn::{knn_label_transfer, vote, DEFAULT_K, ROI_LABEL};
pub use region::{region_faces, RegionSelection};
pub use smooth::{savitzky_golay_kernel, savitzky_golay_smooth};
