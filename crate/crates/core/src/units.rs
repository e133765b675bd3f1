//! Unit annotations and conversion into working units.
//!
//! The working unit system is millimeters, grams, milliseconds, and volts.
//! Model files annotate each value (`mass = 1.5 g`, `stiffness = 12 mN.mm/rad`)
//! and the loader converts to working units, checking dimensions along the
//! way. In this system 1 g·mm/ms² happens to equal 1 N, which keeps contact
//! impulses and spring constants near unity for desk-scale models.

use std::fmt;

/// Exponents over (length, mass, time, voltage). Angles are dimensionless.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Dim {
    pub length: i8,
    pub mass: i8,
    pub time: i8,
    pub voltage: i8,
}

impl Dim {
    pub const fn new(length: i8, mass: i8, time: i8, voltage: i8) -> Self {
        Dim { length, mass, time, voltage }
    }

    pub const NONE: Dim = Dim::new(0, 0, 0, 0);
    pub const LENGTH: Dim = Dim::new(1, 0, 0, 0);
    pub const MASS: Dim = Dim::new(0, 1, 0, 0);
    pub const TIME: Dim = Dim::new(0, 0, 1, 0);
    pub const VOLTAGE: Dim = Dim::new(0, 0, 0, 1);
    pub const VELOCITY: Dim = Dim::new(1, 0, -1, 0);
    pub const ACCELERATION: Dim = Dim::new(1, 0, -2, 0);
    pub const FORCE: Dim = Dim::new(1, 1, -2, 0);
    /// Torque and energy share g·mm²/ms².
    pub const TORQUE: Dim = Dim::new(2, 1, -2, 0);
    pub const INERTIA: Dim = Dim::new(2, 1, 0, 0);
    /// Force per length (prismatic stiffness).
    pub const LINEAR_STIFFNESS: Dim = Dim::new(0, 1, -2, 0);
    /// Torque per angle (revolute stiffness) — angle is dimensionless.
    pub const TORSIONAL_STIFFNESS: Dim = Dim::TORQUE;
    /// Force per velocity (prismatic damping).
    pub const LINEAR_DAMPING: Dim = Dim::new(0, 1, -1, 0);
    /// Torque per angular velocity (revolute damping).
    pub const TORSIONAL_DAMPING: Dim = Dim::new(2, 1, -1, 0);
    pub const FORCE_PER_VOLT: Dim = Dim::new(1, 1, -2, -1);
    pub const TORQUE_PER_VOLT: Dim = Dim::new(2, 1, -2, -1);

    fn mul(self, other: Dim, sign: i8) -> Dim {
        Dim::new(
            self.length + sign * other.length,
            self.mass + sign * other.mass,
            self.time + sign * other.time,
            self.voltage + sign * other.voltage,
        )
    }

    fn pow(self, n: i8) -> Dim {
        Dim::new(self.length * n, self.mass * n, self.time * n, self.voltage * n)
    }
}

impl fmt::Display for Dim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = [
            ("mm", self.length),
            ("g", self.mass),
            ("ms", self.time),
            ("V", self.voltage),
        ]
        .iter()
        .filter(|(_, e)| *e != 0)
        .map(|(name, e)| {
            if *e == 1 {
                (*name).to_string()
            } else {
                format!("{name}^{e}")
            }
        })
        .collect();
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("."))
        }
    }
}

/// Scale factor into working units plus the dimension it carries.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Unit {
    pub scale: f64,
    pub dim: Dim,
}

fn base_unit(token: &str) -> Option<Unit> {
    let (scale, dim) = match token {
        "mm" => (1.0, Dim::LENGTH),
        "cm" => (10.0, Dim::LENGTH),
        "m" => (1e3, Dim::LENGTH),
        "um" => (1e-3, Dim::LENGTH),
        "ms" => (1.0, Dim::TIME),
        "s" => (1e3, Dim::TIME),
        "us" => (1e-3, Dim::TIME),
        "g" => (1.0, Dim::MASS),
        "kg" => (1e3, Dim::MASS),
        "mg" => (1e-3, Dim::MASS),
        "V" => (1.0, Dim::VOLTAGE),
        "mV" => (1e-3, Dim::VOLTAGE),
        "kV" => (1e3, Dim::VOLTAGE),
        // 1 N = 1 kg·m/s² = 1 g·mm/ms².
        "N" => (1.0, Dim::FORCE),
        "mN" => (1e-3, Dim::FORCE),
        "uN" => (1e-6, Dim::FORCE),
        // 1 J = 1e3 g·mm²/ms².
        "J" => (1e3, Dim::TORQUE),
        "mJ" => (1.0, Dim::TORQUE),
        "Hz" => (1e-3, Dim::new(0, 0, -1, 0)),
        "kHz" => (1.0, Dim::new(0, 0, -1, 0)),
        // Angles are dimensionless; degrees fold into the scale.
        "rad" => (1.0, Dim::NONE),
        "deg" => (std::f64::consts::PI / 180.0, Dim::NONE),
        _ => return None,
    };
    Some(Unit { scale, dim })
}

/// Parse a compound unit expression such as `mN.mm/rad` or `mm/ms^2`.
///
/// Tokens are multiplied with `.` (or `*`) and divided with `/`; each token
/// may carry an integer power `^n`. Division binds to the single token that
/// follows it.
pub fn parse_unit(expr: &str) -> Result<Unit, String> {
    let expr = expr.trim();
    if expr.is_empty() {
        return Err("empty unit expression".into());
    }
    let mut scale = 1.0f64;
    let mut dim = Dim::NONE;
    let mut rest = expr;
    let mut sign: i8 = 1;
    loop {
        let split = rest.find(['.', '*', '/']);
        let (token, next) = match split {
            Some(idx) => (&rest[..idx], Some((rest.as_bytes()[idx], &rest[idx + 1..]))),
            None => (rest, None),
        };
        let token = token.trim();
        let (name, power) = match token.split_once('^') {
            Some((n, p)) => {
                let power: i8 = p
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad exponent in unit token `{token}`"))?;
                (n.trim(), power)
            }
            None => (token, 1),
        };
        let unit = base_unit(name).ok_or_else(|| format!("unknown unit `{name}`"))?;
        scale *= unit.scale.powi(i32::from(sign) * i32::from(power));
        dim = dim.mul(unit.dim.pow(power), sign);
        match next {
            None => break,
            Some((op, tail)) => {
                sign = if op == b'/' { -1 } else { 1 };
                rest = tail;
            }
        }
    }
    Ok(Unit { scale, dim })
}

/// Convert an annotated value into working units checking the dimension.
pub fn convert(value: f64, unit_expr: &str, expected: Dim) -> Result<f64, String> {
    let unit = parse_unit(unit_expr)?;
    if unit.dim != expected {
        return Err(format!(
            "unit `{unit_expr}` has dimension {} but {} was expected",
            unit.dim, expected
        ));
    }
    Ok(value * unit.scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn si_force_is_working_force() {
        let n = parse_unit("N").unwrap();
        let work = parse_unit("g.mm/ms^2").unwrap();
        assert_eq!(n.dim, work.dim);
        assert_relative_eq!(n.scale, work.scale);
    }

    #[test]
    fn gravity_conversion() {
        // 9.81 m/s² = 9.81e-3 mm/ms²
        let v = convert(9.81, "m/s^2", Dim::ACCELERATION).unwrap();
        assert_relative_eq!(v, 9.81e-3, max_relative = 1e-12);
    }

    #[test]
    fn torsional_stiffness_conversion() {
        // 1 mN·mm/rad = 1e-3 g·mm²/ms² per rad
        let v = convert(1.0, "mN.mm/rad", Dim::TORSIONAL_STIFFNESS).unwrap();
        assert_relative_eq!(v, 1e-3, max_relative = 1e-12);
        // equivalently in SI
        let si = convert(1e-6, "N.m/rad", Dim::TORSIONAL_STIFFNESS).unwrap();
        assert_relative_eq!(si, v, max_relative = 1e-12);
    }

    #[test]
    fn degrees_fold_into_scale() {
        let v = convert(45.0, "deg", Dim::NONE).unwrap();
        assert_relative_eq!(v, std::f64::consts::FRAC_PI_4, max_relative = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let err = convert(1.0, "mm", Dim::MASS).unwrap_err();
        assert!(err.contains("expected"));
    }

    #[test]
    fn unknown_unit_is_rejected() {
        assert!(parse_unit("furlong").is_err());
        assert!(parse_unit("mm^x").is_err());
        assert!(parse_unit("").is_err());
    }

    #[test]
    fn inertia_kg_m2() {
        // 1 kg·m² = 1e3 g · 1e6 mm² = 1e9 g·mm²
        let v = convert(1.0, "kg.m^2", Dim::INERTIA).unwrap();
        assert_relative_eq!(v, 1e9, max_relative = 1e-12);
    }
}
