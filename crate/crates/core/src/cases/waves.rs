//! Seismic source and arrival analysis for wave-propagation runs.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::system::VectorFn;

/// Ricker wavelet `(1 − 2π²f²τ²) exp(−π²f²τ²)`, `τ = t − t0`.
pub fn ricker(fc: f64, t0: f64, t: f64) -> f64 {
    let a = (PI * fc * (t - t0)).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

/// Body force `amplitude · ricker(t)` along the last axis, spread uniformly
/// over the disc (or ball) of radius `radius` around `center` so that the
/// resultant equals the wavelet amplitude.
pub fn ricker_source(fc: f64, t0: f64, center: Point, radius: f64, amplitude: f64, dim: usize) -> VectorFn {
    assert!(fc > 0.0 && radius > 0.0);
    let measure = if dim == 2 { PI * radius * radius } else { 4.0 / 3.0 * PI * radius.powi(3) };
    let vertical = dim - 1;
    Arc::new(move |x: &Point, t| {
        let mut f = [0.0; 3];
        if (x - center).norm() <= radius {
            f[vertical] = amplitude * ricker(fc, t0, t) / measure;
        }
        f
    })
}

/// First time at which `|signal|` reaches `fraction` of its peak.
pub fn first_arrival(times: &[f64], signal: &[f64], fraction: f64) -> Result<f64> {
    let peak = signal.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Other("no arrival: signal is identically zero".into()));
    }
    let i = signal.iter().position(|v| v.abs() >= fraction * peak).expect("peak is attained");
    Ok(times[i])
}

/// Wave speed from the first arrivals (5% of peak) at two probes at
/// distances `d0 < d1` from the source.
pub fn wave_speed_probe(times: &[f64], near: (&[f64], f64), far: (&[f64], f64)) -> Result<f64> {
    let t0 = first_arrival(times, near.0, 0.05)?;
    let t1 = first_arrival(times, far.0, 0.05)?;
    if !(t1 > t0) {
        return Err(Error::Other(format!("no arrival ordering: far probe at {t1} s, near probe at {t0} s")));
    }
    Ok((far.1 - near.1) / (t1 - t0))
}

/// Time shift of `b` relative to `a` maximizing their cross-correlation
/// (uniform sampling `dt`, non-negative shifts).
pub fn correlation_lag(a: &[f64], b: &[f64], dt: f64) -> f64 {
    let n = a.len().min(b.len());
    let mut best = (0usize, f64::NEG_INFINITY);
    for lag in 0..n {
        let s: f64 = (0..n - lag).map(|i| a[i] * b[i + lag]).sum();
        if s > best.1 {
            best = (lag, s);
        }
    }
    best.0 as f64 * dt
}

/// Summary of the disturbance recorded by a line of surface probes.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceWave {
    /// Median apparent speed between successive probes (cross-correlation).
    pub apparent_speed: f64,
    /// Per probe: first-arrival pick and time of the largest vertical motion.
    pub arrivals: Vec<(f64, f64)>,
    /// Per probe: `|v_h| / |v_v|` at the time of the largest vertical motion.
    pub horizontal_ratio: Vec<f64>,
}

impl SurfaceWave {
    /// A later, slower, predominantly vertical pulse: the peak follows the
    /// first arrival at every probe, it travels slower than `max_speed`, and
    /// its vertical motion dominates.
    pub fn detected(&self, max_speed: f64) -> bool {
        self.arrivals.iter().all(|(first, peak)| peak > first)
            && self.apparent_speed < max_speed
            && self.horizontal_ratio.iter().all(|r| *r < 1.0)
    }
}

/// Analyse vertical and horizontal records at surface probes ordered by
/// increasing offset `offsets` from the epicentre.
pub fn surface_wave(times: &[f64], vertical: &[Vec<f64>], horizontal: &[Vec<f64>], offsets: &[f64]) -> Result<SurfaceWave> {
    if vertical.len() < 2 || vertical.len() != offsets.len() || horizontal.len() != offsets.len() {
        return Err(Error::Other("surface analysis needs ≥ 2 probes with both components".into()));
    }
    let dt = times[1] - times[0];
    let mut arrivals = Vec::new();
    let mut ratio = Vec::new();
    for (v, h) in vertical.iter().zip(horizontal) {
        let first = first_arrival(times, v, 0.05)?;
        let (ip, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, x)| if x.abs() > best.1 { (i, x.abs()) } else { best });
        arrivals.push((first, times[ip]));
        ratio.push(h[ip].abs() / v[ip].abs());
    }
    let mut speeds: Vec<f64> = (0..offsets.len() - 1)
        .map(|k| {
            let lag = correlation_lag(&vertical[k], &vertical[k + 1], dt);
            if lag > 0.0 { (offsets[k + 1] - offsets[k]) / lag } else { f64::INFINITY }
        })
        .collect();
    speeds.sort_by(f64::total_cmp);
    let apparent_speed = speeds[speeds.len() / 2];
    Ok(SurfaceWave { apparent_speed, arrivals, horizontal_ratio: ratio })
}

/// Low-frequency transverse phase speed of the planar Cosserat medium at
/// wavenumber `k`: the rotation follows the macro-rotation with a lag set by
/// the couple modulus `4Gℓ²`, so `G_eff = G + G_c ℓ²k² / (G_c/G + ℓ²k²)`.
pub fn cosserat_shear_speed(g: f64, gc: f64, length: f64, density: f64, k: f64) -> f64 {
    let lk2 = (length * k).powi(2);
    let g_eff = if gc > 0.0 { g + gc * lk2 / (gc / g + lk2) } else { g };
    (g_eff / density).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ricker_peak_and_decay() {
        assert_eq!(ricker(14.5, 0.1, 0.1), 1.0);
        assert!(ricker(14.5, 0.1, 10.0).abs() < 1e-300);
        assert!(ricker(14.5, 0.1, -10.0).abs() < 1e-300);
    }

    #[test]
    fn ricker_has_zero_mean() {
        let (fc, t0) = (14.5, 0.1);
        let n = 200_000;
        let (a, b) = (-0.5, 0.7);
        let h = (b - a) / n as f64;
        let mut s = 0.5 * (ricker(fc, t0, a) + ricker(fc, t0, b));
        for i in 1..n {
            s += ricker(fc, t0, a + i as f64 * h);
        }
        assert!((s * h).abs() < 1e-6);
    }

    #[test]
    fn source_resultant_is_the_wavelet() {
        let src = ricker_source(10.0, 0.0, Point::new(0.0, 0.0, 0.0), 2.0, 3.0, 2);
        let inside = src(&Point::new(0.5, 0.5, 0.0), 0.0);
        assert!((inside[1] * PI * 4.0 - 3.0).abs() < 1e-12);
        assert_eq!(src(&Point::new(3.0, 0.0, 0.0), 0.0), [0.0; 3]);
    }

    fn pulse(times: &[f64], arrival: f64) -> Vec<f64> {
        times.iter().map(|&t| ricker(20.0, arrival + 0.08, t)).collect()
    }

    #[test]
    fn speed_from_synthetic_arrivals() {
        let times: Vec<f64> = (0..8000).map(|i| i as f64 * 1e-4).collect();
        let c = 2750.0;
        let near = pulse(&times, 200.0 / c);
        let far = pulse(&times, 500.0 / c);
        let v = wave_speed_probe(&times, (&near, 200.0), (&far, 500.0)).unwrap();
        assert!((v - c).abs() < 0.01 * c, "{v}");
        let near2 = pulse(&times, 400.0 / c);
        let far2 = pulse(&times, 1000.0 / c);
        let v2 = wave_speed_probe(&times, (&near2, 400.0), (&far2, 1000.0)).unwrap();
        assert!((v2 - v).abs() < 0.01 * c);
    }

    #[test]
    fn zero_field_has_no_arrival() {
        let times = vec![0.0, 1.0, 2.0];
        let z = vec![0.0; 3];
        assert!(wave_speed_probe(&times, (&z, 1.0), (&z, 2.0)).is_err());
    }

    #[test]
    fn correlation_recovers_shift() {
        let times: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-3).collect();
        let a = pulse(&times, 0.2);
        let b = pulse(&times, 0.45);
        assert!((correlation_lag(&a, &b, 1e-3) - 0.25).abs() < 1.5e-3);
    }

    #[test]
    fn classical_limit_of_shear_speed() {
        let c = cosserat_shear_speed(7.52e9, 7.52e9, 0.0, 2500.0, 0.05);
        assert!((c - (7.52e9f64 / 2500.0).sqrt()).abs() < 1e-9);
        assert!(cosserat_shear_speed(7.52e9, 7.52e9, 14.0, 2500.0, 0.05) > c);
    }
}
