use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::leaf::hjw_stability_check;
use crate::roof::{entanglement_of_formation, Direction, RoofOptions};
use crate::subalgebra::SubalgebraSpec;

use super::families::m3_symmetric_state;
use super::group::permutation_action;
use super::orbit::{best_single_orbit, m3_two_orbit_candidates, two_orbit_ansatz};

pub const Z_MIN: f64 = -1.0 / 6.0;
pub const Z_MAX: f64 = 1.0 / 3.0;
/// `z` at which the orbit of `(2,1,1)/√6` alone reproduces `ω_z`.
pub const Z1_CANDIDATE: f64 = 5.0 / 18.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanOptions {
    pub roof: RoofOptions,
    /// Threshold on `E_orbit1 - E_direct` marking broken symmetry.
    pub value_gap: f64,
    /// Threshold on `μ` marking a second orbit with non-trivial weight.
    pub mu_threshold: f64,
    pub bracket_width: f64,
    pub stability_probes: usize,
    /// Record wall-clock time per point. Off keeps reports reproducible.
    pub timing: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            roof: RoofOptions::default(),
            value_gap: 1e-4,
            mu_threshold: 1e-3,
            bracket_width: 1e-3,
            stability_probes: 8,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub z: f64,
    pub e_direct: f64,
    pub e_orbit1: Option<f64>,
    pub e_two_orbit: Option<f64>,
    pub mu: Option<f64>,
    pub best_label: String,
    /// Stationarity residual of the optimizer's decomposition.
    pub residual: f64,
    /// Optimizer flags, plus `orbit1_unstable` when the symmetric orbit fails the second-order test.
    pub flags: Vec<String>,
    pub runtime_ms: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
}

impl Bracket {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, z: f64) -> bool {
        self.lo <= z && z <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detected {
    /// Onset of `E_orbit1 - E_direct > value_gap` below 0.
    pub z0: Option<Bracket>,
    /// Onset of zero-weight instability of the symmetric orbit below 0.
    pub z0_stability: Option<Bracket>,
    /// Onset of `μ > mu_threshold` above 0.
    pub z1: Option<Bracket>,
    pub z1_candidate: f64,
    /// Largest `|ΔE/Δz|` between neighbouring grid points.
    pub lipschitz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub points: Vec<ScanPoint>,
    pub detected: Detected,
    pub seed: u64,
}

impl ScanReport {
    pub fn grid(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.z).collect()
    }
}

/// `n` uniform points on `[-1/6, 1/3]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .map(|i| {
            if i == n - 1 {
                Z_MAX
            } else {
                Z_MIN + (Z_MAX - Z_MIN) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

pub fn default_grid() -> Vec<f64> {
    uniform_grid(151)
}

struct Probe {
    e_direct: f64,
    orbit1: Option<f64>,
    residual: f64,
    flags: Vec<String>,
}

fn direct_and_orbit(z: f64, a: &SubalgebraSpec, opts: &ScanOptions) -> Result<Probe> {
    let rho = m3_symmetric_state(z)?;
    let res = entanglement_of_formation(&rho, a, &opts.roof)?;
    let orbit1 = best_single_orbit(z, a)?;
    Ok(Probe {
        e_direct: res.value,
        orbit1: orbit1.map(|f| f.value),
        residual: res.stationarity_residual,
        flags: res.flags,
    })
}

fn orbit1_unstable(z: f64, a: &SubalgebraSpec, opts: &ScanOptions) -> Result<bool> {
    let rho = m3_symmetric_state(z)?;
    let Some(fit) = best_single_orbit(z, a)? else {
        return Ok(false);
    };
    let st = hjw_stability_check(&fit.ensemble, &rho, a, Direction::Min, opts.stability_probes)?;
    Ok(st.unstable)
}

fn two_orbit_mu(z: f64, a: &SubalgebraSpec) -> Result<Option<(f64, f64)>> {
    let rho = m3_symmetric_state(z)?;
    let g = permutation_action(3)?;
    let (ca, cb) = m3_two_orbit_candidates();
    Ok(two_orbit_ansatz(&rho, &g, &ca, &cb, a)?.fit().map(|f| (f.value, f.mu)))
}

fn scan_point(z: f64, a: &SubalgebraSpec, opts: &ScanOptions) -> Result<ScanPoint> {
    let start = Instant::now();
    let probe = direct_and_orbit(z, a, opts)?;
    let two = two_orbit_mu(z, a)?;
    let mut flags = probe.flags;
    if z < 0.0 && orbit1_unstable(z, a, opts)? {
        flags.push("orbit1_unstable".into());
    }
    let tol = 2e-4;
    let best_label = if probe.orbit1.is_some_and(|v| (v - probe.e_direct).abs() <= tol) {
        "orbit1"
    } else if two.is_some_and(|(v, _)| (v - probe.e_direct).abs() <= tol) {
        "two_orbit"
    } else {
        "broken"
    };
    Ok(ScanPoint {
        z,
        e_direct: probe.e_direct,
        e_orbit1: probe.orbit1,
        e_two_orbit: two.map(|t| t.0),
        mu: two.map(|t| t.1),
        best_label: best_label.into(),
        residual: probe.residual,
        flags,
        runtime_ms: opts.timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Bisects between `inside` (predicate false) and `outside` (predicate true).
fn bisect(mut inside: f64, mut outside: f64, width: f64, pred: impl Fn(f64) -> Result<bool>) -> Result<Bracket> {
    while (outside - inside).abs() > width {
        let mid = 0.5 * (inside + outside);
        if pred(mid)? {
            outside = mid;
        } else {
            inside = mid;
        }
    }
    Ok(Bracket {
        lo: inside.min(outside),
        hi: inside.max(outside),
    })
}

/// First sign change of `pred` walking away from `z = 0` along the grid
/// in the given direction, refined by bisection.
fn onset(
    points: &[ScanPoint],
    downward: bool,
    width: f64,
    flag: impl Fn(&ScanPoint) -> bool,
    pred: impl Fn(f64) -> Result<bool>,
) -> Result<Option<Bracket>> {
    let mut side: Vec<&ScanPoint> = points
        .iter()
        .filter(|p| if downward { p.z <= 0.0 } else { p.z >= 0.0 })
        .collect();
    if downward {
        side.reverse();
    }
    for w in side.windows(2) {
        if !flag(w[0]) && flag(w[1]) {
            return bisect(w[0].z, w[1].z, width, &pred).map(Some);
        }
    }
    Ok(None)
}

/// Scans the symmetric `M₃` family against the diagonal subalgebra.
///
/// Each point records the optimizer value, the best symmetric single orbit,
/// and the two-orbit mixture of `(1,1,1)/√3` with the symmetric branch of
/// `(2,1,1)/√6`. Per-point failures are recorded as flags; only a grid
/// outside the physical range is an error.
pub fn bifurcation_scan(z_grid: &[f64], opts: &ScanOptions) -> Result<ScanReport> {
    if let Some(&z) = z_grid.iter().find(|&&z| !(Z_MIN - 1e-12..=Z_MAX + 1e-12).contains(&z)) {
        return Err(Error::InvalidParameter(format!("grid point {z} outside −1/6 ≤ z ≤ 1/3")));
    }
    let a = SubalgebraSpec::diagonal(3)?;
    let mut grid: Vec<f64> = z_grid.iter().map(|z| z.clamp(Z_MIN, Z_MAX)).collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let points: Vec<ScanPoint> = grid
        .par_iter()
        .map(|&z| {
            scan_point(z, &a, opts).unwrap_or_else(|e| ScanPoint {
                z,
                e_direct: f64::NAN,
                e_orbit1: None,
                e_two_orbit: None,
                mu: None,
                best_label: "error".into(),
                residual: f64::NAN,
                flags: vec![format!("error: {e}")],
                runtime_ms: None,
            })
        })
        .collect();

    let gap_of = |p: &ScanPoint| p.e_orbit1.is_none_or(|o| o - p.e_direct > opts.value_gap);
    let z0 = onset(&points, true, opts.bracket_width, gap_of, |z| {
        let p = direct_and_orbit(z, &a, opts)?;
        Ok(p.orbit1.is_none_or(|o| o - p.e_direct > opts.value_gap))
    })?;
    let z0_stability = onset(
        &points,
        true,
        opts.bracket_width,
        |p| p.flags.iter().any(|f| f == "orbit1_unstable"),
        |z| orbit1_unstable(z, &a, opts),
    )?;
    let mu_of = |p: &ScanPoint| p.mu.is_some_and(|m| m > opts.mu_threshold);
    let z1 = onset(&points, false, opts.bracket_width, mu_of, |z| {
        Ok(two_orbit_mu(z, &a)?.is_some_and(|(_, m)| m > opts.mu_threshold))
    })?;
    let lipschitz = points
        .windows(2)
        .filter(|w| w[0].e_direct.is_finite() && w[1].e_direct.is_finite())
        .map(|w| ((w[1].e_direct - w[0].e_direct) / (w[1].z - w[0].z)).abs())
        .fold(0.0, f64::max);
    Ok(ScanReport {
        points,
        detected: Detected {
            z0,
            z0_stability,
            z1,
            z1_candidate: Z1_CANDIDATE,
            lipschitz,
        },
        seed: opts.roof.seed,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearityRow {
    pub z: f64,
    pub mu: Option<f64>,
    /// `|E_direct - (μ E_A + (1-μ) E_B)|`; `None` outside the two-orbit region.
    pub gap: Option<f64>,
}

/// Compares the optimizer with the two-orbit interpolation wherever the
/// second orbit carries weight above the scan threshold.
pub fn leaf_linearity_along_scan(report: &ScanReport, mu_threshold: f64) -> Vec<LinearityRow> {
    report
        .points
        .iter()
        .map(|p| {
            let applicable = p.mu.is_some_and(|m| m > mu_threshold);
            LinearityRow {
                z: p.z,
                mu: p.mu,
                gap: if applicable {
                    p.e_two_orbit.map(|e| (p.e_direct - e).abs())
                } else {
                    None
                },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shape() {
        let g = default_grid();
        assert_eq!(g.len(), 151);
        assert_eq!(g[0], Z_MIN);
        assert_eq!(g[150], Z_MAX);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn rejects_out_of_range_grid() {
        assert!(bifurcation_scan(&[0.5], &ScanOptions::default()).is_err());
    }

    #[test]
    fn bisect_finds_threshold() {
        let b = bisect(0.0, 1.0, 1e-3, |z| Ok(z > 0.3)).unwrap();
        assert!(b.width() <= 1e-3 && b.contains(0.3));
    }
}
