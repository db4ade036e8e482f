use half::f16;

/// Largest finite half-precision value.
pub const F16_MAX: f32 = 65504.0;

/// Operand precision. Accumulation is always `f32`.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    /// Operands rounded to half precision before each multiply.
    F16Emu,
}

impl Precision {
    pub fn name(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F16Emu => "f16emu",
        }
    }

    /// Round one value to operand precision; the flag reports saturation.
    pub fn round(self, x: f32) -> (f32, bool) {
        match self {
            Precision::F32 => (x, false),
            Precision::F16Emu => round_f16(x),
        }
    }

    /// Round in place, returning how many values saturated.
    pub fn round_slice(self, xs: &mut [f32]) -> usize {
        if self == Precision::F32 {
            return 0;
        }
        let mut saturated = 0;
        for x in xs {
            let (r, s) = round_f16(*x);
            *x = r;
            saturated += s as usize;
        }
        saturated
    }

    /// Bytes per element of an operand stored at this precision.
    pub fn operand_bytes(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F16Emu => 2,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "f32" => Ok(Precision::F32),
            "f16emu" => Ok(Precision::F16Emu),
            other => Err(format!(
                "unknown precision '{other}' (expected f32 or f16emu)"
            )),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Round-to-nearest-even to half precision, saturating finite overflow to
/// `±65504` instead of producing infinity. Infinities and NaN pass through.
pub fn round_f16(x: f32) -> (f32, bool) {
    let h = f16::from_f32(x);
    if h.is_infinite() && x.is_finite() {
        (F16_MAX.copysign(x), true)
    } else {
        (h.to_f32(), false)
    }
}
