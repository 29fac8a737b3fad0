/// Smooth seeded RGB value noise over 3D points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Texture {
    seed: u64,
    frequency: f64,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64, iz: i64, channel: u64) -> f64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    for v in [ix as u64, iy as u64, iz as u64, channel] {
        h = mix(h ^ v.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    }
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

impl Texture {
    pub fn new(seed: u64, frequency: f64) -> Self {
        Self { seed, frequency }
    }

    fn noise(&self, p: [f64; 3], channel: u64, freq: f64) -> f64 {
        let s = p.map(|c| c * freq);
        let i = s.map(|c| c.floor());
        let f = [
            smooth(s[0] - i[0]),
            smooth(s[1] - i[1]),
            smooth(s[2] - i[2]),
        ];
        let (ix, iy, iz) = (i[0] as i64, i[1] as i64, i[2] as i64);
        let mut acc = 0.0;
        for corner in 0..8 {
            let (dx, dy, dz) = (corner & 1, (corner >> 1) & 1, (corner >> 2) & 1);
            let w = (if dx == 1 { f[0] } else { 1.0 - f[0] })
                * (if dy == 1 { f[1] } else { 1.0 - f[1] })
                * (if dz == 1 { f[2] } else { 1.0 - f[2] });
            acc += w * lattice(self.seed, ix + dx, iy + dy, iz + dz, channel);
        }
        acc
    }

    /// RGB in `[0.1, 0.9]`.
    pub fn color(&self, p: [f64; 3]) -> [f32; 3] {
        std::array::from_fn(|c| {
            let n = 0.7 * self.noise(p, c as u64, self.frequency)
                + 0.3 * self.noise(p, c as u64 + 3, 2.0 * self.frequency);
            (0.1 + 0.8 * n) as f32
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let t = Texture::new(5, 3.0);
        for i in 0..100 {
            let p = [i as f64 * 0.037, -(i as f64) * 0.021, 0.5];
            let c = t.color(p);
            assert_eq!(c, Texture::new(5, 3.0).color(p));
            assert!(c.iter().all(|v| (0.1..=0.9).contains(v)));
        }
    }

    #[test]
    fn continuous_across_cells() {
        let t = Texture::new(1, 3.0);
        let a = t.color([1.0 / 3.0 - 1e-9, 0.2, 0.2]);
        let b = t.color([1.0 / 3.0 + 1e-9, 0.2, 0.2]);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() < 1e-6);
        }
    }
}
