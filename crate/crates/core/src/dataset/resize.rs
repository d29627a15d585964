//! Bilinear resampling with half-pixel centers (the `INTER_LINEAR`
//! convention): destination pixel `d` samples source coordinate
//! `(d + 0.5) * src / dst - 0.5`, clamped to the border.

pub fn resize_bilinear(src: &[f32], src_h: usize, src_w: usize, dst_h: usize, dst_w: usize) -> Vec<f32> {
    assert_eq!(src.len(), src_h * src_w, "resize input size");
    if (src_h, src_w) == (dst_h, dst_w) {
        return src.to_vec();
    }
    let taps = |dst: usize, src_n: usize| -> Vec<(usize, usize, f32)> {
        let scale = src_n as f64 / dst as f64;
        (0..dst)
            .map(|d| {
                let f = (d as f64 + 0.5) * scale - 0.5;
                let mut i = f.floor();
                let mut frac = f - i;
                if i < 0.0 {
                    i = 0.0;
                    frac = 0.0;
                }
                let i = i as usize;
                if i >= src_n - 1 {
                    (src_n - 1, src_n - 1, 0.0)
                } else {
                    (i, i + 1, frac as f32)
                }
            })
            .collect()
    };
    let rows = taps(dst_h, src_h);
    let cols = taps(dst_w, src_w);
    let mut out = Vec::with_capacity(dst_h * dst_w);
    for &(r0, r1, fr) in &rows {
        let top = &src[r0 * src_w..(r0 + 1) * src_w];
        let bottom = &src[r1 * src_w..(r1 + 1) * src_w];
        for &(c0, c1, fc) in &cols {
            let t = top[c0] + (top[c1] - top[c0]) * fc;
            let b = bottom[c0] + (bottom[c1] - bottom[c0]) * fc;
            out.push(t + (b - t) * fr);
        }
    }
    out
}
