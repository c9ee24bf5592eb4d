use serde::{Deserialize, Serialize};

use super::TelemetryError;

const EARTH_RADIUS_M: f64 = 6_371_008.8;
/// Squared-distance slack for treating two candidate feet as equidistant.
const TIE_TOL_M2: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// Route polyline in a local equirectangular frame (meters) anchored at an
/// origin, by default the vertex centroid. Arc lengths are planar.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<LatLon>,
    origin: LatLon,
    cos_lat0: f64,
    xy: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<LatLon>) -> Result<Self, TelemetryError> {
        if vertices.is_empty() {
            return Err(TelemetryError::DegeneratePath);
        }
        let n = vertices.len() as f64;
        let origin = LatLon {
            lat: vertices.iter().map(|v| v.lat).sum::<f64>() / n,
            lon: vertices.iter().map(|v| v.lon).sum::<f64>() / n,
        };
        Self::with_origin(vertices, origin)
    }

    pub fn with_origin(vertices: Vec<LatLon>, origin: LatLon) -> Result<Self, TelemetryError> {
        let cos_lat0 = origin.lat.to_radians().cos();
        let xy: Vec<[f64; 2]> = vertices
            .iter()
            .map(|p| equirect(origin, cos_lat0, *p))
            .collect();

        let distinct = xy.windows(2).filter(|w| w[0] != w[1]).count();
        if xy.len() < 2 || distinct == 0 {
            return Err(TelemetryError::DegeneratePath);
        }

        let mut cumulative = Vec::with_capacity(xy.len());
        cumulative.push(0.0);
        for (i, w) in xy.windows(2).enumerate() {
            let len = dist(w[0], w[1]);
            if len <= 0.0 {
                return Err(TelemetryError::RepeatedVertex { index: i + 1 });
            }
            cumulative.push(cumulative[i] + len);
        }

        Ok(Self {
            vertices,
            origin,
            cos_lat0,
            xy,
            cumulative,
        })
    }

    /// Builds a path from planar points given in meters east/north of `anchor`.
    pub fn from_local(anchor: LatLon, points: &[[f64; 2]]) -> Result<Self, TelemetryError> {
        let cos_lat0 = anchor.lat.to_radians().cos();
        let vertices = points
            .iter()
            .map(|&p| inverse_equirect(anchor, cos_lat0, p))
            .collect();
        Self::with_origin(vertices, anchor)
    }

    pub fn vertices(&self) -> &[LatLon] {
        &self.vertices
    }

    pub fn local_vertices(&self) -> &[[f64; 2]] {
        &self.xy
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn length(&self) -> f64 {
        *self.cumulative.last().expect("at least two vertices")
    }

    pub fn to_local(&self, p: LatLon) -> [f64; 2] {
        equirect(self.origin, self.cos_lat0, p)
    }

    pub fn from_local_point(&self, p: [f64; 2]) -> LatLon {
        inverse_equirect(self.origin, self.cos_lat0, p)
    }

    /// Arc length of the nearest point on the path. Ties go to the smallest s.
    pub fn project(&self, point: LatLon) -> f64 {
        self.project_local(self.to_local(point))
    }

    /// Same as [`Polyline::project`] for a point already in the local frame.
    pub fn project_local(&self, p: [f64; 2]) -> f64 {
        let mut best_d2 = f64::INFINITY;
        let mut best_s = 0.0;
        for (i, w) in self.xy.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let u = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
            let foot = [a[0] + u * d[0], a[1] + u * d[1]];
            let d2 = (p[0] - foot[0]).powi(2) + (p[1] - foot[1]).powi(2);
            // near-ties within round-off keep the earlier (smaller s) segment
            if d2 < best_d2 - TIE_TOL_M2 {
                best_d2 = d2;
                best_s = self.cumulative[i] + u * (self.cumulative[i + 1] - self.cumulative[i]);
            }
        }
        best_s.clamp(0.0, self.length())
    }

    /// Planar point at arc length `s` (clamped to the path).
    pub fn local_point_at(&self, s: f64) -> [f64; 2] {
        let s = s.clamp(0.0, self.length());
        let seg = match self.cumulative.partition_point(|&c| c <= s) {
            0 => 0,
            k => (k - 1).min(self.xy.len() - 2),
        };
        let (s_a, s_b) = (self.cumulative[seg], self.cumulative[seg + 1]);
        let u = (s - s_a) / (s_b - s_a);
        let (a, b) = (self.xy[seg], self.xy[seg + 1]);
        [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])]
    }

    pub fn point_at(&self, s: f64) -> LatLon {
        self.from_local_point(self.local_point_at(s))
    }
}

fn equirect(origin: LatLon, cos_lat0: f64, p: LatLon) -> [f64; 2] {
    [
        EARTH_RADIUS_M * (p.lon - origin.lon).to_radians() * cos_lat0,
        EARTH_RADIUS_M * (p.lat - origin.lat).to_radians(),
    ]
}

fn inverse_equirect(origin: LatLon, cos_lat0: f64, p: [f64; 2]) -> LatLon {
    LatLon {
        lat: origin.lat + (p[1] / EARTH_RADIUS_M).to_degrees(),
        lon: origin.lon + (p[0] / (EARTH_RADIUS_M * cos_lat0)).to_degrees(),
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt()
}
