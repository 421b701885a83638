use rayon::prelude::*;

use super::MetricsError;
use crate::video::{Frame, VideoClip};

pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const PEAK: f64 = 255.0;

fn check_shapes(a: &VideoClip, b: &VideoClip) -> Result<(), MetricsError> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(MetricsError::ShapeMismatch(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.frame_count(),
            b.width(),
            b.height(),
            b.frame_count()
        )))
    }
}

/// Mean squared error over every sample of every channel and frame.
pub fn mse(a: &VideoClip, b: &VideoClip) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let sse: u64 = a
        .frames()
        .par_iter()
        .zip(b.frames().par_iter())
        .map(|(fa, fb)| {
            fa.data()
                .iter()
                .zip(fb.data())
                .map(|(&x, &y)| {
                    let d = x as i64 - y as i64;
                    (d * d) as u64
                })
                .sum::<u64>()
        })
        .sum();
    let n = a.frame_count() as f64 * a.frame_len() as f64;
    Ok(sse as f64 / n)
}

/// `10 log10(255^2 / MSE)`; identical clips give `f64::INFINITY`.
pub fn psnr(a: &VideoClip, b: &VideoClip) -> Result<f64, MetricsError> {
    let m = mse(a, b)?;
    if m == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (PEAK * PEAK / m).log10())
}

/// Formats a score the way RD files store it; infinity is written as `inf`.
pub fn format_score(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let half = (SSIM_WINDOW / 2) as f64;
    let mut w = [0.0; SSIM_WINDOW];
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn luma(frame: &Frame) -> Vec<f64> {
    frame
        .data()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect()
}

/// Separable "valid" filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + SSIM_WINDOW]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, a)| a * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

fn ssim_frame(a: &Frame, b: &Frame, w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> f64 {
    let x = luma(a);
    let y = luma(b);
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
    let mu_x = filter_valid(&x, w, h, k);
    let mu_y = filter_valid(&y, w, h, k);
    let e_xx = filter_valid(&xx, w, h, k);
    let e_yy = filter_valid(&yy, w, h, k);
    let e_xy = filter_valid(&xy, w, h, k);
    let c1 = (K1 * PEAK).powi(2);
    let c2 = (K2 * PEAK).powi(2);
    let mut sum = 0.0;
    for i in 0..mu_x.len() {
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = e_xx[i] - mx * mx;
        let vy = e_yy[i] - my * my;
        let cov = e_xy[i] - mx * my;
        sum += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
    sum / mu_x.len() as f64
}

/// Single-scale SSIM on BT.601 luma with an 11x11 Gaussian window (sigma 1.5),
/// averaged over all window positions and then over frames.
pub fn ssim(a: &VideoClip, b: &VideoClip) -> Result<f64, MetricsError> {
    check_shapes(a, b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::TooSmall { width: w, height: h });
    }
    let k = gaussian_window();
    let per_frame: Vec<f64> = a
        .frames()
        .par_iter()
        .zip(b.frames().par_iter())
        .map(|(fa, fb)| ssim_frame(fa, fb, w, h, &k))
        .collect();
    // fixed summation order keeps the result schedule-independent
    Ok(per_frame.iter().sum::<f64>() / per_frame.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gradient_noise;
    use crate::video::Fps;

    fn constant(v: u8, w: usize, h: usize, n: usize) -> VideoClip {
        VideoClip::new(w, h, Fps::default(), vec![Frame::filled(w, h, [v, v, v]); n]).unwrap()
    }

    fn offset(clip: &VideoClip, d: u8) -> VideoClip {
        let frames = clip
            .frames()
            .iter()
            .map(|f| Frame::from_rgb(f.data().iter().map(|&v| v + d).collect()))
            .collect();
        VideoClip::new(clip.width(), clip.height(), clip.fps(), frames).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = constant(50, 16, 16, 2);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let p = psnr(&a, &offset(&a, 16)).unwrap();
        assert!((p - 10.0 * (65025.0f64 / 256.0).log10()).abs() < 1e-12);
        assert!((p - 24.049).abs() < 1e-3);

        let half = VideoClip::new(
            16,
            16,
            Fps::default(),
            vec![a.frames()[0].clone(), offset(&a, 16).frames()[1].clone()],
        )
        .unwrap();
        assert!((psnr(&a, &half).unwrap() - 27.059).abs() < 1e-3);
        assert!(psnr(&a, &constant(50, 16, 8, 2)).is_err());
    }

    #[test]
    fn score_formatting() {
        assert_eq!(format_score(f64::INFINITY), "inf");
        assert_eq!(format_score(24.5), "24.5");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn ssim_closed_forms() {
        let a = gradient_noise(24, 20, 2, 20, 1);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);

        let c1 = (0.01f64 * 255.0).powi(2);
        let expected = (2.0 * 100.0 * 120.0 + c1) / (100.0f64.powi(2) + 120.0f64.powi(2) + c1);
        let s = ssim(&constant(100, 16, 16, 1), &constant(120, 16, 16, 1)).unwrap();
        assert!((s - expected).abs() < 1e-9, "{s} vs {expected}");
        assert!((s - 0.98361).abs() < 1e-5);
    }

    #[test]
    fn ssim_negative_for_inverted_image() {
        let a = gradient_noise(32, 32, 1, 40, 5);
        let neg = VideoClip::new(
            32,
            32,
            Fps::default(),
            vec![Frame::from_rgb(a.frames()[0].data().iter().map(|&v| 255 - v).collect())],
        )
        .unwrap();
        assert!(ssim(&a, &neg).unwrap() < 0.0);
    }

    #[test]
    fn ssim_symmetric_and_validated() {
        let a = gradient_noise(20, 15, 2, 30, 1);
        let b = gradient_noise(20, 15, 2, 30, 2);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        let small = constant(1, 10, 30, 1);
        assert!(matches!(ssim(&small, &small), Err(MetricsError::TooSmall { .. })));
    }

    #[test]
    fn window_is_normalized() {
        let w = gaussian_window();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(w[0], w[10]);
    }
}
