use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Relu,
    /// φ(x) = tanh(sin(π(x + 1))) + x
    TanhSin,
}

impl Activation {
    /// Identifier used in checkpoint files.
    pub fn id(self) -> u32 {
        match self {
            Activation::Tanh => 0,
            Activation::Relu => 1,
            Activation::TanhSin => 2,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            0 => Some(Activation::Tanh),
            1 => Some(Activation::Relu),
            2 => Some(Activation::TanhSin),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::TanhSin => "tanh_sin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "tanh" => Some(Activation::Tanh),
            "relu" => Some(Activation::Relu),
            "tanh_sin" => Some(Activation::TanhSin),
            _ => None,
        }
    }

    pub fn twice_differentiable(self) -> bool {
        !matches!(self, Activation::Relu)
    }

    #[inline]
    pub fn value(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::TanhSin => (PI * (z + 1.0)).sin().tanh() + z,
        }
    }

    /// (σ, σ')
    #[inline]
    pub fn first(self, z: f64) -> (f64, f64) {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                (t, 1.0 - t * t)
            }
            Activation::Relu => {
                if z > 0.0 {
                    (z, 1.0)
                } else {
                    (0.0, 0.0)
                }
            }
            Activation::TanhSin => {
                let (s, c) = (PI * (z + 1.0)).sin_cos();
                let t = s.tanh();
                (t + z, (1.0 - t * t) * PI * c + 1.0)
            }
        }
    }

    /// (σ, σ', σ'', σ''')
    #[inline]
    pub fn third(self, z: f64) -> [f64; 4] {
        match self {
            Activation::Tanh => {
                let t = z.tanh();
                let d1 = 1.0 - t * t;
                let d2 = -2.0 * t * d1;
                let d3 = d1 * (4.0 * t * t - 2.0 * d1);
                [t, d1, d2, d3]
            }
            Activation::Relu => {
                let (v, d1) = self.first(z);
                [v, d1, 0.0, 0.0]
            }
            Activation::TanhSin => {
                // g = tanh(s(z)), s = sin(π(z+1)); chain rule up to third order.
                let (s, c) = (PI * (z + 1.0)).sin_cos();
                let t = s.tanh();
                let t1 = 1.0 - t * t;
                let t2 = -2.0 * t * t1;
                let t3 = t1 * (4.0 * t * t - 2.0 * t1);
                let s1 = PI * c;
                let s2 = -PI * PI * s;
                let s3 = -PI * PI * PI * c;
                [
                    t + z,
                    t1 * s1 + 1.0,
                    t2 * s1 * s1 + t1 * s2,
                    t3 * s1 * s1 * s1 + 3.0 * t2 * s1 * s2 + t1 * s3,
                ]
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_derivatives(act: Activation, z: f64) {
        let h = 1e-5;
        let d = act.third(z);
        let p = act.third(z + h);
        let m = act.third(z - h);
        assert!((d[0] - act.value(z)).abs() < 1e-15);
        for order in 0..3 {
            let fd = (p[order] - m[order]) / (2.0 * h);
            let scale = d[order + 1].abs().max(1.0);
            assert!(
                (fd - d[order + 1]).abs() <= 1e-6 * scale,
                "{act:?} order {} at {z}: analytic {} fd {fd}",
                order + 1,
                d[order + 1]
            );
        }
        let (v, d1) = act.first(z);
        assert_eq!(v, d[0]);
        assert!((d1 - d[1]).abs() < 1e-14);
    }

    #[test]
    fn tanh_derivatives() {
        for z in [-2.0, -0.3, 0.0, 0.7, 1.9] {
            check_derivatives(Activation::Tanh, z);
        }
    }

    #[test]
    fn tanh_sin_derivatives() {
        for z in [-1.7, -0.4, 0.0, 0.25, 1.3] {
            check_derivatives(Activation::TanhSin, z);
        }
    }

    #[test]
    fn tanh_at_origin() {
        let d = Activation::Tanh.third(0.0);
        assert_eq!(d[1], 1.0);
        assert_eq!(d[2], 0.0);
    }

    #[test]
    fn ids_round_trip() {
        for a in [Activation::Tanh, Activation::Relu, Activation::TanhSin] {
            assert_eq!(Activation::from_id(a.id()), Some(a));
            assert_eq!(Activation::from_name(a.name()), Some(a));
        }
        assert_eq!(Activation::from_id(9), None);
    }
}
