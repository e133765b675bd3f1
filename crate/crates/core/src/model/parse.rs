//! Line-oriented model file format.
//!
//! Files are UTF-8 text made of sections `[world]`, `[body]`, `[joint]`,
//! `[actuator]`, `[loop]`, `[contact]`, each holding `key = value` lines.
//! Dimensioned values carry a unit annotation (`mass = 1.5 g`); the loader
//! converts everything into working units (mm, g, ms, V). Unknown sections
//! and keys are rejected.

use super::{
    Actuator, Axis, Body, ContactPoint, Joint, JointKind, LoopConstraint, Mode, Model, ModelError,
};
use crate::real::{lit, Real};
use crate::units::{convert, Dim};
use nalgebra::{Matrix3, Vector3};
use std::collections::BTreeMap;

struct Section {
    name: String,
    line: usize,
    entries: Vec<(String, String, usize)>,
}

impl Section {
    fn get(&self, key: &str) -> Option<(&str, usize)> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, l)| (v.as_str(), *l))
    }

    fn require(&self, key: &str) -> Result<(&str, usize), ModelError> {
        self.get(key).ok_or_else(|| ModelError::Parse {
            line: self.line,
            message: format!("[{}] section is missing required key `{key}`", self.name),
        })
    }
}

fn perr<M: Into<String>>(line: usize, message: M) -> ModelError {
    ModelError::Parse {
        line,
        message: message.into(),
    }
}

fn split_sections(text: &str) -> Result<Vec<Section>, ModelError> {
    const SECTIONS: &[&str] = &["world", "body", "joint", "actuator", "loop", "contact"];
    const KEYS: &[(&str, &[&str])] = &[
        ("world", &["name", "mode", "gravity"]),
        ("body", &["name", "mass", "inertia", "com"]),
        (
            "joint",
            &[
                "name", "type", "parent", "child", "origin", "axis", "stiffness", "damping",
                "rest", "limits",
            ],
        ),
        (
            "actuator",
            &["name", "joint", "gain", "qgain", "bias", "spring", "vmin", "vmax"],
        ),
        (
            "loop",
            &["body_a", "offset_a", "body_b", "offset_b", "directions"],
        ),
        ("contact", &["name", "body", "offset"]),
    ];
    let keymap: BTreeMap<&str, &[&str]> = KEYS.iter().copied().collect();

    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| perr(line_no, "unterminated section header"))?
                .trim()
                .to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(perr(line_no, format!("unknown section `[{name}]`")));
            }
            sections.push(Section {
                name,
                line: line_no,
                entries: Vec::new(),
            });
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| perr(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let section = sections
            .last_mut()
            .ok_or_else(|| perr(line_no, "key-value line before any section header"))?;
        let allowed = keymap[section.name.as_str()];
        if !allowed.contains(&key.as_str()) {
            return Err(perr(
                line_no,
                format!("unknown key `{key}` in [{}] section", section.name),
            ));
        }
        if section.entries.iter().any(|(k, _, _)| *k == key) {
            return Err(perr(
                line_no,
                format!("duplicate key `{key}` in [{}] section", section.name),
            ));
        }
        section.entries.push((key, value, line_no));
    }
    Ok(sections)
}

/// `value unit` with dimension checking.
fn scalar(value: &str, dim: Dim, line: usize) -> Result<f64, ModelError> {
    let mut tokens = value.split_whitespace();
    let num: f64 = tokens
        .next()
        .ok_or_else(|| perr(line, "empty value"))?
        .parse()
        .map_err(|_| perr(line, format!("expected a number in `{value}`")))?;
    let unit = tokens
        .next()
        .ok_or_else(|| perr(line, format!("missing unit annotation in `{value}`")))?;
    if tokens.next().is_some() {
        return Err(perr(line, format!("trailing tokens in `{value}`")));
    }
    convert(num, unit, dim).map_err(|e| perr(line, e))
}

/// `n₁ … n_k unit`; planar vectors have two components (x z).
fn vector(value: &str, dim: Dim, mode: Mode, line: usize) -> Result<Vector3<f64>, ModelError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    let expect = match mode {
        Mode::Planar => 2,
        Mode::Spatial => 3,
    };
    if tokens.len() != expect + 1 {
        return Err(perr(
            line,
            format!("expected {expect} components plus a unit in `{value}`"),
        ));
    }
    let mut nums = [0.0f64; 3];
    for (i, t) in tokens[..expect].iter().enumerate() {
        nums[i] = t
            .parse()
            .map_err(|_| perr(line, format!("bad number `{t}`")))?;
    }
    let scale = convert(1.0, tokens[expect], dim).map_err(|e| perr(line, e))?;
    Ok(match mode {
        Mode::Planar => Vector3::new(nums[0] * scale, 0.0, nums[1] * scale),
        Mode::Spatial => Vector3::new(nums[0] * scale, nums[1] * scale, nums[2] * scale),
    })
}

fn range(value: &str, dim: Dim, line: usize) -> Result<(f64, f64), ModelError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(perr(line, format!("expected `lo hi unit` in `{value}`")));
    }
    let lo: f64 = tokens[0]
        .parse()
        .map_err(|_| perr(line, format!("bad number `{}`", tokens[0])))?;
    let hi: f64 = tokens[1]
        .parse()
        .map_err(|_| perr(line, format!("bad number `{}`", tokens[1])))?;
    let scale = convert(1.0, tokens[2], dim).map_err(|e| perr(line, e))?;
    Ok((lo * scale, hi * scale))
}

fn axis(value: &str, mode: Mode, line: usize) -> Result<Vector3<f64>, ModelError> {
    let v = match value.trim() {
        "x" => Vector3::new(1.0, 0.0, 0.0),
        "y" => Vector3::new(0.0, 1.0, 0.0),
        "z" => Vector3::new(0.0, 0.0, 1.0),
        other => {
            let tokens: Vec<&str> = other.split_whitespace().collect();
            let expect = match mode {
                Mode::Planar => 2,
                Mode::Spatial => 3,
            };
            if tokens.len() != expect {
                return Err(perr(
                    line,
                    format!("axis must be x|y|z or {expect} components"),
                ));
            }
            let mut nums = [0.0f64; 3];
            for (i, t) in tokens.iter().enumerate() {
                nums[i] = t
                    .parse()
                    .map_err(|_| perr(line, format!("bad axis component `{t}`")))?;
            }
            match mode {
                Mode::Planar => Vector3::new(nums[0], 0.0, nums[1]),
                Mode::Spatial => Vector3::new(nums[0], nums[1], nums[2]),
            }
        }
    };
    let n = v.norm();
    if n < 1e-12 {
        return Err(perr(line, "axis must be nonzero"));
    }
    Ok(v / n)
}

fn inertia_matrix(value: &str, mode: Mode, line: usize) -> Result<Matrix3<f64>, ModelError> {
    let tokens: Vec<&str> = value.split_whitespace().collect();
    if tokens.len() < 2 {
        return Err(perr(line, "inertia needs value(s) and a unit"));
    }
    let unit = tokens[tokens.len() - 1];
    let scale = convert(1.0, unit, Dim::INERTIA).map_err(|e| perr(line, e))?;
    let nums: Result<Vec<f64>, ModelError> = tokens[..tokens.len() - 1]
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| perr(line, format!("bad number `{t}`")))
        })
        .collect();
    let nums = nums?;
    match (mode, nums.len()) {
        (Mode::Planar, 1) => {
            let v = nums[0] * scale;
            Ok(Matrix3::from_diagonal(&Vector3::new(v, v, v)))
        }
        (Mode::Spatial, 3) => Ok(Matrix3::from_diagonal(&Vector3::new(
            nums[0] * scale,
            nums[1] * scale,
            nums[2] * scale,
        ))),
        (Mode::Spatial, 6) => {
            let (ixx, iyy, izz, ixy, ixz, iyz) = (
                nums[0] * scale,
                nums[1] * scale,
                nums[2] * scale,
                nums[3] * scale,
                nums[4] * scale,
                nums[5] * scale,
            );
            Ok(Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz))
        }
        (Mode::Planar, n) => Err(perr(
            line,
            format!("planar inertia takes 1 value, got {n}"),
        )),
        (Mode::Spatial, n) => Err(perr(
            line,
            format!("spatial inertia takes 3 or 6 values, got {n}"),
        )),
    }
}

fn directions(value: &str, mode: Mode, line: usize) -> Result<Vec<Axis>, ModelError> {
    let mut out = Vec::new();
    for token in value.split_whitespace() {
        let ax = match token {
            "x" => Axis::X,
            "y" => Axis::Y,
            "z" => Axis::Z,
            other => return Err(perr(line, format!("unknown direction `{other}`"))),
        };
        if mode == Mode::Planar && ax == Axis::Y {
            return Err(perr(line, "planar loops cannot constrain the y direction"));
        }
        if out.contains(&ax) {
            return Err(perr(line, format!("duplicate direction `{token}`")));
        }
        out.push(ax);
    }
    Ok(out)
}

/// Parse and validate a model from file text. `default_name` is used when
/// the `[world]` section does not name the model.
pub fn parse_model<T: Real>(text: &str, default_name: &str) -> Result<Model<T>, ModelError> {
    let sections = split_sections(text)?;

    let world = sections
        .iter()
        .find(|s| s.name == "world")
        .ok_or_else(|| perr(1, "model file has no [world] section"))?;
    let mode = match world.require("mode")? {
        ("planar", _) => Mode::Planar,
        ("spatial", _) => Mode::Spatial,
        (other, line) => return Err(perr(line, format!("unknown mode `{other}`"))),
    };
    let (gval, gline) = world.require("gravity")?;
    let gravity = vector(gval, Dim::ACCELERATION, mode, gline)?;
    let name = world
        .get("name")
        .map(|(v, _)| v.to_string())
        .unwrap_or_else(|| default_name.to_string());

    let mut bodies: Vec<Body<f64>> = Vec::new();
    let mut body_names: Vec<String> = Vec::new();
    for s in sections.iter().filter(|s| s.name == "body") {
        let (bname, nline) = s.require("name")?;
        if body_names.iter().any(|n| n == bname) {
            return Err(perr(nline, format!("duplicate body name `{bname}`")));
        }
        let (mval, mline) = s.require("mass")?;
        let (ival, iline) = s.require("inertia")?;
        let com = match s.get("com") {
            Some((v, l)) => vector(v, Dim::LENGTH, mode, l)?,
            None => Vector3::zeros(),
        };
        bodies.push(Body {
            name: bname.to_string(),
            mass: scalar(mval, Dim::MASS, mline)?,
            inertia: inertia_matrix(ival, mode, iline)?,
            com,
        });
        body_names.push(bname.to_string());
    }

    let body_idx = |name: &str, line: usize| -> Result<usize, ModelError> {
        body_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| perr(line, format!("unknown body `{name}`")))
    };

    let mut joints: Vec<Joint<f64>> = Vec::new();
    let mut joint_names: Vec<String> = Vec::new();
    for s in sections.iter().filter(|s| s.name == "joint") {
        let (jname, nline) = s.require("name")?;
        if joint_names.iter().any(|n| n == jname) {
            return Err(perr(nline, format!("duplicate joint name `{jname}`")));
        }
        let (tval, tline) = s.require("type")?;
        let kind = match tval {
            "floating" => JointKind::Floating,
            "revolute" => {
                let ax = match s.get("axis") {
                    Some((v, l)) => {
                        let a = axis(v, mode, l)?;
                        if mode == Mode::Planar && (a - Vector3::new(0.0, 1.0, 0.0)).norm() > 1e-12
                        {
                            return Err(perr(l, "planar revolute joints rotate about y"));
                        }
                        a
                    }
                    None => Vector3::new(0.0, 1.0, 0.0),
                };
                if mode == Mode::Spatial && s.get("axis").is_none() {
                    return Err(perr(tline, "spatial revolute joint needs an axis"));
                }
                JointKind::Revolute { axis: ax }
            }
            "prismatic" => {
                let (v, l) = s.require("axis")?;
                JointKind::Prismatic { axis: axis(v, mode, l)? }
            }
            other => return Err(perr(tline, format!("unknown joint type `{other}`"))),
        };
        let (pval, pline) = s.require("parent")?;
        let parent = if pval == "world" {
            None
        } else {
            Some(body_idx(pval, pline)?)
        };
        let (cval, cline) = s.require("child")?;
        let child = body_idx(cval, cline)?;
        let origin = match s.get("origin") {
            Some((v, l)) => vector(v, Dim::LENGTH, mode, l)?,
            None => Vector3::zeros(),
        };
        // Spring/damper dimensions depend on the joint type.
        let (kdim, cdim, posdim) = match kind {
            JointKind::Prismatic { .. } => {
                (Dim::LINEAR_STIFFNESS, Dim::LINEAR_DAMPING, Dim::LENGTH)
            }
            _ => (Dim::TORSIONAL_STIFFNESS, Dim::TORSIONAL_DAMPING, Dim::NONE),
        };
        let stiffness = match s.get("stiffness") {
            Some((v, l)) => scalar(v, kdim, l)?,
            None => 0.0,
        };
        let damping = match s.get("damping") {
            Some((v, l)) => scalar(v, cdim, l)?,
            None => 0.0,
        };
        let rest = match s.get("rest") {
            Some((v, l)) => scalar(v, posdim, l)?,
            None => 0.0,
        };
        let limits = match s.get("limits") {
            Some((v, l)) => Some(range(v, posdim, l)?),
            None => None,
        };
        if matches!(kind, JointKind::Floating)
            && (s.get("stiffness").is_some() || s.get("damping").is_some())
        {
            return Err(perr(tline, "floating joints take no spring or damper"));
        }
        joints.push(Joint {
            name: jname.to_string(),
            kind,
            parent,
            child,
            origin,
            stiffness,
            damping,
            rest,
            limits,
            coord_offset: 0,
        });
        joint_names.push(jname.to_string());
    }

    let mut actuators: Vec<Actuator<f64>> = Vec::new();
    for s in sections.iter().filter(|s| s.name == "actuator") {
        let (aname, _) = s.require("name")?;
        let (jval, jline) = s.require("joint")?;
        let joint = joint_names
            .iter()
            .position(|n| n == jval)
            .ok_or_else(|| perr(jline, format!("unknown joint `{jval}`")))?;
        let prismatic = matches!(joints[joint].kind, JointKind::Prismatic { .. });
        let (gain_dim, q_dim, bias_dim) = if prismatic {
            (Dim::FORCE_PER_VOLT, Dim::LINEAR_STIFFNESS, Dim::FORCE)
        } else {
            (Dim::TORQUE_PER_VOLT, Dim::TORSIONAL_STIFFNESS, Dim::TORQUE)
        };
        let (gval, gline) = s.require("gain")?;
        let q_gain = match s.get("qgain") {
            Some((v, l)) => scalar(v, q_dim, l)?,
            None => 0.0,
        };
        let bias = match s.get("bias") {
            Some((v, l)) => scalar(v, bias_dim, l)?,
            None => 0.0,
        };
        let spring = match s.get("spring") {
            Some((v, l)) => scalar(v, q_dim, l)?,
            None => 0.0,
        };
        let vmin = match s.get("vmin") {
            Some((v, l)) => scalar(v, Dim::VOLTAGE, l)?,
            None => 0.0,
        };
        let vmax = match s.get("vmax") {
            Some((v, l)) => scalar(v, Dim::VOLTAGE, l)?,
            None => 225.0,
        };
        actuators.push(Actuator {
            name: aname.to_string(),
            joint,
            gain: scalar(gval, gain_dim, gline)?,
            q_gain,
            bias,
            spring,
            v_limits: (vmin, vmax),
        });
    }

    let mut loops: Vec<LoopConstraint<f64>> = Vec::new();
    for s in sections.iter().filter(|s| s.name == "loop") {
        let (aval, aline) = s.require("body_a")?;
        let (bval, bline) = s.require("body_b")?;
        let offset_a = match s.get("offset_a") {
            Some((v, l)) => vector(v, Dim::LENGTH, mode, l)?,
            None => Vector3::zeros(),
        };
        let offset_b = match s.get("offset_b") {
            Some((v, l)) => vector(v, Dim::LENGTH, mode, l)?,
            None => Vector3::zeros(),
        };
        let dirs = match s.get("directions") {
            Some((v, l)) => directions(v, mode, l)?,
            None => match mode {
                Mode::Planar => vec![Axis::X, Axis::Z],
                Mode::Spatial => vec![Axis::X, Axis::Y, Axis::Z],
            },
        };
        loops.push(LoopConstraint {
            body_a: body_idx(aval, aline)?,
            offset_a,
            body_b: body_idx(bval, bline)?,
            offset_b,
            directions: dirs,
        });
    }

    let mut contacts: Vec<ContactPoint<f64>> = Vec::new();
    for (i, s) in sections.iter().filter(|s| s.name == "contact").enumerate() {
        let (bval, bline) = s.require("body")?;
        let offset = match s.get("offset") {
            Some((v, l)) => vector(v, Dim::LENGTH, mode, l)?,
            None => Vector3::zeros(),
        };
        let cname = s
            .get("name")
            .map(|(v, _)| v.to_string())
            .unwrap_or_else(|| format!("contact{i}"));
        contacts.push(ContactPoint {
            name: cname,
            body: body_idx(bval, bline)?,
            offset,
        });
    }

    let model = Model::new(
        name,
        mode,
        bodies,
        joints,
        actuators,
        loops,
        contacts,
        gravity,
    )?;
    Ok(cast_model(&model))
}

fn cast_model<T: Real>(m: &Model<f64>) -> Model<T> {
    let c3 = |v: &Vector3<f64>| Vector3::new(lit::<T>(v.x), lit::<T>(v.y), lit::<T>(v.z));
    let cm = |m: &Matrix3<f64>| Matrix3::from_fn(|i, j| lit::<T>(m[(i, j)]));
    Model {
        name: m.name.clone(),
        mode: m.mode,
        bodies: m
            .bodies
            .iter()
            .map(|b| Body {
                name: b.name.clone(),
                mass: lit(b.mass),
                inertia: cm(&b.inertia),
                com: c3(&b.com),
            })
            .collect(),
        joints: m
            .joints
            .iter()
            .map(|j| Joint {
                name: j.name.clone(),
                kind: match &j.kind {
                    JointKind::Floating => JointKind::Floating,
                    JointKind::Revolute { axis } => JointKind::Revolute { axis: c3(axis) },
                    JointKind::Prismatic { axis } => JointKind::Prismatic { axis: c3(axis) },
                },
                parent: j.parent,
                child: j.child,
                origin: c3(&j.origin),
                stiffness: lit(j.stiffness),
                damping: lit(j.damping),
                rest: lit(j.rest),
                limits: j.limits.map(|(a, b)| (lit(a), lit(b))),
                coord_offset: j.coord_offset,
            })
            .collect(),
        actuators: m
            .actuators
            .iter()
            .map(|a| Actuator {
                name: a.name.clone(),
                joint: a.joint,
                gain: lit(a.gain),
                q_gain: lit(a.q_gain),
                bias: lit(a.bias),
                spring: lit(a.spring),
                v_limits: (lit(a.v_limits.0), lit(a.v_limits.1)),
            })
            .collect(),
        loops: m
            .loops
            .iter()
            .map(|l| LoopConstraint {
                body_a: l.body_a,
                offset_a: c3(&l.offset_a),
                body_b: l.body_b,
                offset_b: c3(&l.offset_b),
                directions: l.directions.clone(),
            })
            .collect(),
        contacts: m
            .contacts
            .iter()
            .map(|c| ContactPoint {
                name: c.name.clone(),
                body: c.body,
                offset: c3(&c.offset),
            })
            .collect(),
        gravity: c3(&m.gravity),
        nq: m.nq,
        eval_order: m.eval_order.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARTICLE: &str = "\
[world]
name = particle
mode = planar
gravity = 0 -9.81e-3 mm/ms^2

[body]
name = ball
mass = 2 g
inertia = 1 g.mm^2

[joint]
name = base
type = floating
parent = world
child = ball

[contact]
body = ball
name = foot
";

    #[test]
    fn minimal_planar_model_loads() {
        let m: Model<f64> = parse_model(PARTICLE, "particle").unwrap();
        assert_eq!(m.nq(), 3);
        assert_eq!(m.n_contacts(), 1);
        assert_eq!(m.bodies[0].mass, 2.0);
        assert!((m.gravity.z + 9.81e-3).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let text = PARTICLE.replace("mass = 2 g", "mass = 2 g\nwibble = 3 g");
        let err = parse_model::<f64>(&text, "x").unwrap_err();
        match err {
            ModelError::Parse { line, message } => {
                assert_eq!(line, 9);
                assert!(message.contains("wibble"));
            }
            other => panic!("expected parse error, got {other}"),
        }
    }

    #[test]
    fn missing_unit_rejected() {
        let text = PARTICLE.replace("mass = 2 g", "mass = 2");
        assert!(parse_model::<f64>(&text, "x").is_err());
    }

    #[test]
    fn actuator_reference_resolved() {
        let text = format!(
            "{PARTICLE}\n[actuator]\nname = a0\njoint = nosuch\ngain = 1 mN.mm/V\n"
        );
        let err = parse_model::<f64>(&text, "x").unwrap_err();
        assert!(err.to_string().contains("nosuch"));
    }

    #[test]
    fn si_units_convert() {
        let text = PARTICLE
            .replace("mass = 2 g", "mass = 0.002 kg")
            .replace("inertia = 1 g.mm^2", "inertia = 1e-9 kg.m^2")
            .replace("gravity = 0 -9.81e-3 mm/ms^2", "gravity = 0 -9.81 m/s^2");
        let m: Model<f64> = parse_model(&text, "particle").unwrap();
        assert!((m.bodies[0].mass - 2.0).abs() < 1e-12);
        assert!((m.bodies[0].inertia[(1, 1)] - 1.0).abs() < 1e-12);
        assert!((m.gravity.z + 9.81e-3).abs() < 1e-15);
    }

    #[test]
    fn loads_at_f32() {
        let m: Model<f32> = parse_model(PARTICLE, "particle").unwrap();
        assert_eq!(m.nq(), 3);
    }
}
