//! Dense saliency maps, probability maps, fixation sets and their
//! summary statistics. Row-major layout, (x = column, y = row).

use crate::error::{Error, Result};
use crate::scalar::{eps_floor, lit, Real};

/// Dense H×W grid of non-negative finite intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyMap<T> {
    width: usize,
    height: usize,
    values: Vec<T>,
}

impl<T: Real> SaliencyMap<T> {
    pub fn new(width: usize, height: usize, values: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMap("zero dimension".into()));
        }
        if values.len() != width * height {
            return Err(Error::InvalidMap(format!(
                "expected {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidMap("non-finite or negative value".into()));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Skips validation; for internal optimizer/finite-difference
    /// iterates that may transiently leave the valid range.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<T>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        Self {
            width,
            height,
            values,
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![T::zero(); width * height],
        }
    }

    pub fn constant(width: usize, height: usize, v: T) -> Result<Self> {
        Self::new(width, height, vec![v; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                got: other.dims(),
            });
        }
        Ok(())
    }

    /// True when every value is ≤ 1 (pixel losses assume unit range).
    pub fn is_unit_range(&self) -> bool {
        self.values.iter().all(|v| *v <= T::one())
    }

    /// Min-max rescale to [0, 1]; a constant map maps to all zeros.
    pub fn normalize_unit(&self) -> SaliencyMap<T> {
        let st = self.stats();
        let range = st.max - st.min;
        let values = if range == T::zero() {
            vec![T::zero(); self.values.len()]
        } else {
            self.values.iter().map(|v| (*v - st.min) / range).collect()
        };
        SaliencyMap {
            width: self.width,
            height: self.height,
            values,
        }
    }

    /// Floor-and-normalize into a strictly positive distribution.
    pub fn to_distribution(&self) -> ProbabilityMap<T> {
        let floor = eps_floor::<T>();
        let total: T = self.values.iter().map(|v| *v + floor).sum();
        let values = self.values.iter().map(|v| (*v + floor) / total).collect();
        ProbabilityMap(SaliencyMap {
            width: self.width,
            height: self.height,
            values,
        })
    }

    /// Population statistics over all pixels.
    pub fn stats(&self) -> MapStats<T> {
        let n = lit::<T>(self.values.len() as f64);
        let sum: T = self.values.iter().copied().sum();
        let mean = sum / n;
        let mut var = T::zero();
        let mut min = self.values[0];
        let mut max = self.values[0];
        for v in &self.values {
            let d = *v - mean;
            var += d * d;
            if *v < min {
                min = *v;
            }
            if *v > max {
                max = *v;
            }
        }
        MapStats {
            mean,
            std: (var / n).sqrt(),
            min,
            max,
            sum,
        }
    }
}

/// Population covariance of two same-shaped maps.
pub fn covariance<T: Real>(a: &SaliencyMap<T>, b: &SaliencyMap<T>) -> Result<T> {
    a.same_dims(b)?;
    let n = lit::<T>(a.len() as f64);
    let ma = a.stats().mean;
    let mb = b.stats().mean;
    let mut cov = T::zero();
    for (x, y) in a.values().iter().zip(b.values()) {
        cov += (*x - ma) * (*y - mb);
    }
    Ok(cov / n)
}

/// Saliency map whose values form a strictly positive distribution
/// summing to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap<T>(SaliencyMap<T>);

impl<T: Real> ProbabilityMap<T> {
    pub fn from_map(map: SaliencyMap<T>) -> Result<Self> {
        if map.values().iter().any(|v| *v <= T::zero()) {
            return Err(Error::NonPositiveDensity);
        }
        let sum: T = map.values().iter().copied().sum();
        if (sum - T::one()).abs() > lit(1e-9) {
            return Err(Error::InvalidMap(format!("distribution sums to {sum}")));
        }
        Ok(Self(map))
    }

    pub fn as_map(&self) -> &SaliencyMap<T> {
        &self.0
    }

    pub fn values(&self) -> &[T] {
        self.0.values()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapStats<T> {
    pub mean: T,
    pub std: T,
    pub min: T,
    pub max: T,
    pub sum: T,
}

/// Set of integer fixation coordinates inside a frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixationSet {
    points: Vec<(usize, usize)>,
    width: usize,
    height: usize,
}

impl FixationSet {
    /// Deduplicates points and checks them against the frame.
    pub fn new(points: Vec<(usize, usize)>, width: usize, height: usize) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        let mut unique = Vec::with_capacity(points.len());
        for (x, y) in points {
            if x >= width || y >= height {
                return Err(Error::OutOfFrame {
                    x,
                    y,
                    width,
                    height,
                });
            }
            if seen.insert((x, y)) {
                unique.push((x, y));
            }
        }
        Ok(Self {
            points: unique,
            width,
            height,
        })
    }

    pub fn points(&self) -> &[(usize, usize)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn frame(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Row-major linear indices of the fixations.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.points.iter().map(move |(x, y)| y * self.width + x)
    }

    /// Binary map with 1 at each fixation.
    pub fn to_map<T: Real>(&self) -> SaliencyMap<T> {
        let mut m = SaliencyMap::zeros(self.width, self.height);
        for idx in self.indices() {
            m.values[idx] = T::one();
        }
        m
    }
}
