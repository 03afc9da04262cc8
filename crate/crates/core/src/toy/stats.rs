use serde::{Deserialize, Serialize};

use super::ToyError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p_two_sided: f64,
}

/// Pooled two-proportion z-test of `s1/n1` against `s2/n2`.
pub fn two_proportion_z_test(s1: u64, n1: u64, s2: u64, n2: u64) -> Result<ZTest, ToyError> {
    if n1 == 0 || n2 == 0 {
        return Err(ToyError::DegenerateSample);
    }
    assert!(s1 <= n1 && s2 <= n2, "successes cannot exceed trials");
    let (p1, p2) = (s1 as f64 / n1 as f64, s2 as f64 / n2 as f64);
    let pooled = (s1 + s2) as f64 / (n1 + n2) as f64;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return Ok(ZTest { z: 0.0, p_two_sided: 1.0 });
    }
    let z = (p1 - p2) / se;
    Ok(ZTest { z, p_two_sided: libm::erfc(z.abs() / std::f64::consts::SQRT_2) })
}
