//! Thread-counting core: blob template, correlation neighbours, spectral
//! dominant orientations, lattice basis selection and the decomposition of
//! translations into fractional thread units.

mod basis;
mod detector;
mod neighbors;
mod orientation;
mod template;

pub use basis::{
    detect_lattice, lattice_distance, refine_basis, thread_decompose, threads_to_physical, LatticeBasis, ThreadDelta,
};
pub use detector::{LatticeDetector, LatticeParams, LatticeResult};
pub use neighbors::{find_neighbors, search_peaks, NeighborPeaks, Peak};
pub use orientation::{dominant_orientations, DominantOrientations, SpectralPeak};
pub use template::{learn_template, learn_template_sized, BlobTemplate};
