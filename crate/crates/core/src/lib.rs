#![forbid(unsafe_code)]

//! Round-synchronous simulator for hybrid local/global networks.
//!
//! The library models a synchronous message-passing network with two
//! communication modes: an unbounded *local* mode along graph edges and a
//! capacity-limited *global* mode in which every node may send and receive at
//! most `gamma` bits per round. On top of the simulator it implements:
//!
//! * the **neighborhood-quality** graph parameter (centralized oracle and a
//!   distributed protocol that computes it), see [`nq`];
//! * deterministic **ruling sets**, nearest-ruler **clustering**, and randomized
//!   **helper sets** that spread a receiver's workload over its cluster, see
//!   [`cluster`];
//! * **k-wise independent hashing** via random polynomials over a prime field,
//!   see [`hash`];
//! * capacity-respecting **token routing** from `k` sources to `l` targets
//!   through hashed intermediates and helper sets, see [`routing`];
//! * a multi-source **shortest-path pipeline** (exact reference solver,
//!   sampled skeleton overlays, and end-to-end label delivery), see [`sp`];
//! * a **lower-bound instance forge** that reweights a graph so that decoding a
//!   random bit string from distance labels requires moving information into a
//!   small ball around a probe node, plus the matching information-flow audit,
//!   see [`lower`].
//!
//! All graph-parameter values (neighborhood quality, stretch) are exact
//! rationals; reports serialize to deterministic JSON so that equal seeds give
//! byte-identical artifacts.

pub mod constants;
pub mod error;
pub mod util;

pub mod graph;
pub mod hash;
pub mod sim;

pub mod cluster;
pub mod nq;
pub mod routing;
pub mod sp;

pub mod lower;

pub use error::{Error, Result};
pub use graph::{GraphKind, NodeId, WeightedGraph};
pub use sim::{ExecutionTrace, SimConfig, ViolationPolicy};

/// Exact rational used for neighborhood quality, stretch, and bound values.
pub type Rat = num_rational::Ratio<i128>;

/// Build a reduced rational `num / den` (`den > 0`).
pub fn rat(num: i128, den: i128) -> Rat {
    Rat::new(num, den)
}
