//! Local linear LOWESS smoother (Cleveland), used to smooth cross-correlation
//! functions before locating their peak.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Points forming the local region around each abscissa.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "size")]
pub enum LocalRegion {
    /// The `k` nearest points by `|dx|`, the point itself included. Equidistant
    /// candidates at the edge are taken lower-x first.
    Nearest(usize),
    /// A fixed run of `w` consecutive points (total width, not a half-width)
    /// centred on the point and shifted inward at the ends.
    Window(usize),
}

impl LocalRegion {
    pub fn size(self) -> usize {
        match self {
            LocalRegion::Nearest(k) | LocalRegion::Window(k) => k,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowessConfig {
    pub region: LocalRegion,
    /// Bisquare re-weighting passes after the initial fit.
    pub robustness_iterations: usize,
}

impl Default for LowessConfig {
    fn default() -> Self {
        LowessConfig {
            region: LocalRegion::Nearest(10),
            robustness_iterations: 0,
        }
    }
}

impl LowessConfig {
    pub fn nearest(k: usize) -> Self {
        LowessConfig {
            region: LocalRegion::Nearest(k),
            ..Self::default()
        }
    }

    pub fn window(w: usize) -> Self {
        LowessConfig {
            region: LocalRegion::Window(w),
            ..Self::default()
        }
    }

    /// Local fits are linear, so a region needs at least three points.
    pub fn validate(&self) -> Result<()> {
        if self.region.size() < 3 {
            return Err(Error::InvalidConfig(format!(
                "LOWESS region of {} points, at least 3 required",
                self.region.size()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCurve {
    pub xs: Vec<f64>,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
}

impl SmoothedCurve {
    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

fn bisquare(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u;
        t * t
    }
}

/// Inclusive index range of the local region around `i` in sorted `xs`.
fn neighborhood(xs: &[f64], i: usize, region: LocalRegion) -> (usize, usize) {
    let n = xs.len();
    match region {
        LocalRegion::Nearest(k) => {
            let (mut lo, mut hi) = (i, i);
            while hi - lo + 1 < k {
                let take_lower = match (lo > 0, hi + 1 < n) {
                    (true, true) => xs[i] - xs[lo - 1] <= xs[hi + 1] - xs[i],
                    (true, false) => true,
                    (false, _) => false,
                };
                if take_lower {
                    lo -= 1;
                } else {
                    hi += 1;
                }
            }
            (lo, hi)
        }
        LocalRegion::Window(w) => {
            let lo = i.saturating_sub(w / 2).min(n - w);
            (lo, lo + w - 1)
        }
    }
}

/// Weighted linear fit over `lo..=hi`, evaluated at `xs[i]`.
fn local_fit(
    xs: &[f64],
    ys: &[f64],
    robust: &[f64],
    i: usize,
    lo: usize,
    hi: usize,
) -> Result<f64> {
    let x0 = xs[i];
    let h = (x0 - xs[lo]).max(xs[hi] - x0);
    if h <= 0.0 {
        return Err(Error::DegenerateNeighborhood(x0));
    }
    let weights: Vec<f64> = (lo..=hi)
        .map(|j| tricube((xs[j] - x0).abs() / h) * robust[j])
        .collect();
    let sw: f64 = weights.iter().sum();
    if sw <= 0.0 {
        // every neighbour was rejected as an outlier; keep the observation
        return Ok(ys[i]);
    }
    let xbar = weights
        .iter()
        .zip(&xs[lo..=hi])
        .map(|(w, x)| w * x)
        .sum::<f64>()
        / sw;
    let ybar = weights
        .iter()
        .zip(&ys[lo..=hi])
        .map(|(w, y)| w * y)
        .sum::<f64>()
        / sw;
    if weights.iter().filter(|w| **w > 0.0).count() < 2 {
        // a single weighted point cannot anchor a slope
        return Ok(ybar);
    }
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((w, x), y) in weights.iter().zip(&xs[lo..=hi]).zip(&ys[lo..=hi]) {
        sxx += w * (x - xbar) * (x - xbar);
        sxy += w * (x - xbar) * (y - ybar);
    }
    Ok(ybar + sxy / sxx * (x0 - xbar))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Smooths `points` with local linear regression and tricube weights. Points
/// are sorted by x first; output is in ascending x.
pub fn lowess_smooth(points: &[(f64, f64)], config: &LowessConfig) -> Result<SmoothedCurve> {
    config.validate()?;
    let k = config.region.size();
    if points.len() < k {
        return Err(Error::TooFewPoints {
            len: points.len(),
            required: k,
        });
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(x.is_finite() && y.is_finite()))
    {
        return Err(Error::OutOfRange {
            what: format!("LOWESS input at x = {x}"),
            value: y,
        });
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = sorted.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::DuplicateAbscissa(w[0].0));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = sorted.into_iter().unzip();
    let n = xs.len();
    let regions: Vec<(usize, usize)> = (0..n)
        .map(|i| neighborhood(&xs, i, config.region))
        .collect();

    let mut robust = vec![1.0; n];
    let mut smoothed = vec![0.0; n];
    for pass in 0..=config.robustness_iterations {
        for (i, &(lo, hi)) in regions.iter().enumerate() {
            smoothed[i] = local_fit(&xs, &ys, &robust, i, lo, hi)?;
        }
        if pass == config.robustness_iterations {
            break;
        }
        let residuals: Vec<f64> = ys.iter().zip(&smoothed).map(|(y, s)| y - s).collect();
        let scale = median(residuals.iter().map(|r| r.abs()).collect());
        if scale.is_nan() || scale <= 0.0 {
            break;
        }
        for (w, r) in robust.iter_mut().zip(&residuals) {
            *w = bisquare(r / (6.0 * scale));
        }
    }

    Ok(SmoothedCurve {
        xs,
        raw: ys,
        smoothed,
    })
}

/// Abscissa of the largest finite smoothed value. Ties go to the smallest
/// `|x|`, then to the negative side.
pub fn argmax_smoothed(curve: &SmoothedCurve) -> Result<(f64, f64)> {
    curve
        .xs
        .iter()
        .zip(&curve.smoothed)
        .filter(|(_, s)| s.is_finite())
        .map(|(x, s)| (*x, *s))
        .reduce(|best, cand| {
            let better = cand.1 > best.1
                || (cand.1 == best.1
                    && (cand.0.abs() < best.0.abs()
                        || (cand.0.abs() == best.0.abs() && cand.0 < best.0)));
            if better {
                cand
            } else {
                best
            }
        })
        .ok_or(Error::AllUndefined)
}
