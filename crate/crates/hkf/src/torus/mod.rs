//! Fourier bookkeeping on the torus `T^d`: alias cells, periodized symbols,
//! Mercer kernels and Karhunen–Loève sampling.

pub mod fourier;
pub mod lattice;
pub mod mercer;
pub mod sampling;
pub mod symbol;

pub use fourier::{dft_alias, Domain, GridField, SpectralField};
pub use lattice::{frequency_box, FrequencyBox, TorusLattice};
pub use mercer::{mercer_kernel, SpectralKernel};
pub use sampling::{kl_draw, kl_sample, KlDraw};
pub use symbol::{alias_sum, alias_table, periodized_symbol, MaternLike, Truncation};
