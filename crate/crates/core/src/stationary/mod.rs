//! Stationary-law estimation and verification: occupation histograms, the
//! closed-form wristband density, the spin-map Jacobian, and hitting
//! diagnostics.

mod density;
mod hitting;
mod histogram;
mod jacobian;
mod spin;

pub use density::{
    verify_density_identities, DensityComparison, IdentityCheck, IdentityReport, WristbandDensity,
};
pub use hitting::{hitting_estimate, HittingReport, Start};
pub use histogram::{histogram_l1, Accumulator, Axis, Coord, OccupancyHistogram};
pub use jacobian::{jacobian_check, steering_map};
pub use spin::{SpinTally, SpinTallyObserver};

use crate::domain::DomainSpec;
use crate::error::Result;
use crate::fields::FieldSet;
use crate::integrator::{run_chain, SimConfig};
use crate::parallel::{chain_seed, map_chains};

/// Run `chains` copies of `cfg` (chain `i` seeded with `cfg.seed + i`) and
/// merge their occupation histograms in chain order.
pub fn occupancy_estimate(
    cfg: &SimConfig,
    chains: usize,
    d: &DomainSpec,
    f: &FieldSet,
    template: &OccupancyHistogram,
) -> Result<OccupancyHistogram> {
    let parts = map_chains(chains, |i| {
        let chain_cfg = cfg.clone().with_seed(chain_seed(cfg.seed, i));
        let mut acc = Accumulator::new(&chain_cfg, template.clone());
        run_chain(&chain_cfg, d, f, &mut acc)?;
        Ok(acc.histogram)
    })?;
    let mut out = template.clone();
    for p in &parts {
        out.merge_from(p)?;
    }
    Ok(out)
}
