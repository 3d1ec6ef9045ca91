//! Approximate robustness radius by bisection over a robustness oracle.

use std::collections::HashMap;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{is_robust, Domain, Verdict};
use crate::error::{Error, Result};
use crate::network::Network;

pub const DEFAULT_UP: f64 = 0.256;
pub const DEFAULT_TOL: f64 = 0.001;

/// Anything that can answer "is the label of `x` invariant within radius `delta`?".
pub trait RobustnessOracle: Sync {
    fn certify(&self, x: &[f64], delta: f64) -> Result<bool>;
}

impl<F> RobustnessOracle for F
where
    F: Fn(&[f64], f64) -> Result<bool> + Sync,
{
    fn certify(&self, x: &[f64], delta: f64) -> Result<bool> {
        self(x, delta)
    }
}

type ProbeKey = (Box<[u64]>, u64);

/// Network + abstract domain oracle. Verdicts are memoised per `(input, δ)`
/// so a threshold check and a later full search share work.
pub struct Verifier<'a> {
    net: &'a Network,
    domain: Domain,
    cache: Mutex<HashMap<ProbeKey, bool>>,
}

impl<'a> Verifier<'a> {
    pub fn new(net: &'a Network, domain: Domain) -> Self {
        Self { net, domain, cache: Mutex::new(HashMap::new()) }
    }

    pub fn network(&self) -> &Network {
        self.net
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Full verdict, bypassing the cache.
    pub fn verdict(&self, x: &[f64], delta: f64) -> Result<Verdict> {
        is_robust(self.net, x, delta, self.domain)
    }

    pub fn cached_probes(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

impl RobustnessOracle for Verifier<'_> {
    fn certify(&self, x: &[f64], delta: f64) -> Result<bool> {
        let key: ProbeKey = (x.iter().map(|v| v.to_bits()).collect(), delta.to_bits());
        if let Some(&hit) = self.cache.lock().unwrap().get(&key) {
            return Ok(hit);
        }
        let robust = self.verdict(x, delta)?.is_robust();
        self.cache.lock().unwrap().insert(key, robust);
        Ok(robust)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    /// Initial upper end of the bracket.
    pub up: f64,
    /// Stop once the bracket is at most this wide.
    pub tol: f64,
    pub domain: Domain,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self { up: DEFAULT_UP, tol: DEFAULT_TOL, domain: Domain::Zonotope }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.up > 0.0 && self.tol > 0.0 && self.tol < self.up && self.up.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "search needs up > 0, tol > 0 and tol < up (got up={}, tol={})",
                self.up, self.tol
            )));
        }
        Ok(())
    }

    /// Number of probes a search performs: `ceil(log2(up / tol))`.
    pub fn probe_count(&self) -> usize {
        let mut width = self.up;
        let mut n = 0;
        while width > self.tol {
            width /= 2.0;
            n += 1;
        }
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub delta: f64,
    pub robust: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusResult {
    /// Certified lower bound on the robustness radius (0 if nothing certified).
    pub radius: f64,
    pub iterations: usize,
    pub probes: Vec<Probe>,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
    /// The search never saw `Unknown`: the true radius may exceed `up`.
    pub saturated: bool,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}

/// Bisection on `[0, up]`: certified midpoints raise the lower end, others
/// lower the upper end, until the bracket is at most `tol` wide. Returns the
/// lower end, which is 0 or a certified radius.
///
/// The bracket width is tracked as `up / 2^n`, which is exact in binary
/// floating point, so the probe count is exactly `ceil(log2(up / tol))`.
pub fn search_radius<O: RobustnessOracle + ?Sized>(oracle: &O, x: &[f64], up: f64, tol: f64) -> Result<RadiusResult> {
    let params = SearchParams { up, tol, domain: Domain::default() };
    params.validate()?;
    let start = Instant::now();
    let (mut low, mut high) = (0.0_f64, up);
    let mut width = up;
    let mut probes = Vec::with_capacity(params.probe_count());
    loop {
        let mid = (low + high) / 2.0;
        let robust = oracle.certify(x, mid)?;
        probes.push(Probe { delta: mid, robust });
        if robust {
            low = mid;
        } else {
            high = mid;
        }
        width /= 2.0;
        if width <= tol {
            break;
        }
    }
    Ok(RadiusResult {
        radius: low,
        iterations: probes.len(),
        saturated: probes.iter().all(|p| p.robust),
        probes,
        wall_time: start.elapsed(),
    })
}

/// Approximate robustness radius of `x` under the network's abstract domain.
pub fn approximate_radius(net: &Network, x: &[f64], params: &SearchParams) -> Result<RadiusResult> {
    net.check_input(x)?;
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument("inputs must lie in [0,1]".into()));
    }
    search_radius(&Verifier::new(net, params.domain), x, params.up, params.tol)
}

/// Radii for many inputs, in input order. `jobs == 0` uses all cores.
/// Per-input failures are reported in place.
pub fn batch_radii(
    verifier: &Verifier<'_>,
    inputs: &[&[f64]],
    params: &SearchParams,
    jobs: usize,
) -> Result<Vec<Result<RadiusResult>>> {
    params.validate()?;
    let run = |x: &&[f64]| -> Result<RadiusResult> {
        verifier.network().check_input(x)?;
        search_radius(verifier, x, params.up, params.tol)
    };
    if jobs == 1 {
        return Ok(inputs.iter().map(run).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(|| inputs.par_iter().map(run).collect()))
}
