//! File formats: profile specs, knots and frame paths.
//!
//! A profile is named either by a builtin string (`sphere`, `sphere:0.8`,
//! `ellipsoid:2`, `spindle:0.1,0.05`, `negative:0.1,0.9`) or by a JSON file
//! holding a [`ProfileSpec`].

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hopf::{FramePoint, KnotPolyline, Quaternion};
use crate::profile::{self, Bump, ProfileFunction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    Sphere {
        #[serde(default = "one")]
        radius: f64,
    },
    Ellipsoid {
        ratio: f64,
    },
    Spindle {
        delta: f64,
        eps: f64,
    },
    #[serde(alias = "negative")]
    NegativeAction {
        delta: f64,
        eps: f64,
    },
    Samples {
        ell: f64,
        t: Vec<f64>,
        gamma: Vec<f64>,
    },
    Stretched {
        base: Box<ProfileSpec>,
        #[serde(rename = "C")]
        c: f64,
        center: f64,
        half_width: f64,
    },
    Normalized {
        base: Box<ProfileSpec>,
        center: f64,
        half_width: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProfileSpec {
    pub fn build(&self) -> Result<ProfileFunction> {
        match self {
            ProfileSpec::Sphere { radius } => ProfileFunction::round(*radius),
            ProfileSpec::Ellipsoid { ratio } => profile::make_ellipsoid(*ratio),
            ProfileSpec::Spindle { delta, eps } => profile::make_spindle(*delta, *eps),
            ProfileSpec::NegativeAction { delta, eps } => Ok(profile::make_negative_action(*delta, *eps)?.profile),
            ProfileSpec::Samples { ell, t, gamma } => ProfileFunction::from_samples(*ell, t.clone(), gamma.clone()),
            ProfileSpec::Stretched { base, c, center, half_width } => {
                profile::stretch(&base.build()?, *c, Bump::new(*center, *half_width))
            }
            ProfileSpec::Normalized { base, center, half_width } => {
                profile::normalize_stretch(&base.build()?, Bump::new(*center, *half_width))
            }
        }
    }

    /// Parses a builtin name such as `ellipsoid:2`.
    pub fn from_builtin(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            vec![]
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::InvalidParameter(format!("bad profile argument in {s:?}: {e}")))?
        };
        let bad = || Error::InvalidParameter(format!("wrong number of arguments in profile {s:?}"));
        match (name.trim(), nums.as_slice()) {
            ("sphere", []) => Ok(ProfileSpec::Sphere { radius: 1.0 }),
            ("sphere", [r]) => Ok(ProfileSpec::Sphere { radius: *r }),
            ("ellipsoid", [r]) => Ok(ProfileSpec::Ellipsoid { ratio: *r }),
            ("spindle", [d, e]) => Ok(ProfileSpec::Spindle { delta: *d, eps: *e }),
            ("negative" | "negative_action", [d, e]) => Ok(ProfileSpec::NegativeAction { delta: *d, eps: *e }),
            ("sphere" | "ellipsoid" | "spindle" | "negative" | "negative_action", _) => Err(bad()),
            _ => Err(Error::InvalidParameter(format!("unknown profile {s:?} (not a file or builtin name)"))),
        }
    }

    /// A path to an existing file is read as JSON, anything else as a builtin.
    pub fn resolve(s: &str) -> Result<Self> {
        let path = Path::new(s);
        if path.is_file() {
            let text = std::fs::read_to_string(path)?;
            Ok(serde_json::from_str(&text)?)
        } else {
            Self::from_builtin(s)
        }
    }

    /// Tabulated form of a profile on `n + 1` equispaced points.
    pub fn tabulate(p: &ProfileFunction, n: usize) -> Self {
        let t = crate::numerics::linspace(0.0, p.ell(), n.max(4));
        let gamma = t.iter().map(|&x| p.at(x).gamma).collect();
        ProfileSpec::Samples { ell: p.ell(), t, gamma }
    }
}

pub fn load_profile(s: &str) -> Result<ProfileFunction> {
    ProfileSpec::resolve(s)?.build()
}

/// Knot file: JSON array of `[w, x, y, z]` points on the unit sphere.
pub fn read_knot(path: &Path) -> Result<KnotPolyline> {
    let text = std::fs::read_to_string(path)?;
    knot_from_json(&text)
}

pub fn knot_from_json(text: &str) -> Result<KnotPolyline> {
    let pts: Vec<[f64; 4]> = serde_json::from_str(text)?;
    KnotPolyline::new(pts.into_iter().map(Quaternion::from_array).collect())
}

pub fn knot_to_json(k: &KnotPolyline) -> Result<String> {
    let pts: Vec<[f64; 4]> = k.points().iter().map(|q| q.to_array()).collect();
    Ok(serde_json::to_string(&pts)?)
}

/// Path file: CSV with columns `u1x,u1y,u1z,u2x,u2y,u2z` (frames), or with
/// columns `t,phi,theta` (states of a profile, moved to the round sphere).
pub fn read_path(path: &Path, profile: Option<&ProfileFunction>) -> Result<Vec<FramePoint>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let frame_cols: Option<Vec<usize>> = ["u1x", "u1y", "u1z", "u2x", "u2y", "u2z"].iter().map(|c| col(c)).collect();
    let state_cols: Option<Vec<usize>> = ["t", "phi", "theta"].iter().map(|c| col(c)).collect();
    let mut out = vec![];
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::InvalidParameter(format!("bad number in path file: {e}")))
        };
        if let Some(c) = &frame_cols {
            let u1 = Vector3::new(get(c[0])?, get(c[1])?, get(c[2])?);
            let u2 = Vector3::new(get(c[3])?, get(c[4])?, get(c[5])?);
            out.push(FramePoint { u1, u2 });
        } else if let Some(c) = &state_cols {
            let p = profile
                .ok_or_else(|| Error::InvalidParameter("a t,phi,theta path needs a profile".into()))?;
            out.push(crate::hopf::round_frame(p, get(c[0])?, get(c[1])?, get(c[2])?));
        } else {
            return Err(Error::InvalidParameter(
                "path file needs columns u1x,u1y,u1z,u2x,u2y,u2z or t,phi,theta".into(),
            ));
        }
    }
    Ok(out)
}

pub fn write_path<W: std::io::Write>(path: &[FramePoint], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["u1x", "u1y", "u1z", "u2x", "u2y", "u2z"])?;
    for z in path {
        wr.serialize([z.u1.x, z.u1.y, z.u1.z, z.u2.x, z.u2.y, z.u2.z])?;
    }
    wr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names() {
        assert_eq!(ProfileSpec::from_builtin("sphere").unwrap(), ProfileSpec::Sphere { radius: 1.0 });
        assert_eq!(ProfileSpec::from_builtin("ellipsoid:2").unwrap(), ProfileSpec::Ellipsoid { ratio: 2.0 });
        assert_eq!(
            ProfileSpec::from_builtin("negative:0.1, 0.9").unwrap(),
            ProfileSpec::NegativeAction { delta: 0.1, eps: 0.9 }
        );
        assert!(ProfileSpec::from_builtin("ellipsoid").is_err());
        assert!(ProfileSpec::from_builtin("torus:1").is_err());
        assert!(ProfileSpec::from_builtin("spindle:a,b").is_err());
    }

    #[test]
    fn json_specs() {
        let s: ProfileSpec = serde_json::from_str(r#"{"kind": "sphere"}"#).unwrap();
        assert_eq!(s, ProfileSpec::Sphere { radius: 1.0 });
        let s: ProfileSpec =
            serde_json::from_str(r#"{"kind": "normalized", "base": {"kind": "sphere", "radius": 0.8}, "center": 1.2566, "half_width": 0.6}"#)
                .unwrap();
        let p = s.build().unwrap();
        assert!((p.area() - 4.0 * std::f64::consts::PI).abs() < 1e-8);
        let s: ProfileSpec = serde_json::from_str(r#"{"kind": "negative", "delta": 0.1, "eps": 0.9}"#).unwrap();
        assert!(matches!(s, ProfileSpec::NegativeAction { .. }));
    }

    #[test]
    fn tabulated_round_trip() {
        let p = profile::make_ellipsoid(2.0).unwrap();
        let spec = ProfileSpec::tabulate(&p, 2000);
        let text = serde_json::to_string(&spec).unwrap();
        let q = serde_json::from_str::<ProfileSpec>(&text).unwrap().build().unwrap();
        for k in 1..20 {
            let t = p.ell() * k as f64 / 20.0;
            assert!((p.at(t).gamma - q.at(t).gamma).abs() < 1e-6);
        }
        assert!((q.integral() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn knot_json_round_trip() {
        let k = KnotPolyline::from_fn(200, Quaternion::exp_i).unwrap();
        let text = knot_to_json(&k).unwrap();
        let back = knot_from_json(&text).unwrap();
        assert_eq!(back.points().len(), k.points().len());
        assert!(back.points().iter().zip(k.points()).all(|(a, b)| a.distance(*b) < 1e-15));
        assert!(knot_from_json("[[2,0,0,0],[0,1,0,0],[0,0,1,0]]").is_err());
    }

    #[test]
    fn path_csv_round_trip() {
        let p = profile::make_sphere();
        let frames: Vec<FramePoint> =
            (0..=100).map(|k| crate::hopf::round_frame(&p, 1.0, 0.3, 2.0 * std::f64::consts::PI * k as f64 / 100.0)).collect();
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("path.csv");
        write_path(&frames, std::fs::File::create(&f).unwrap()).unwrap();
        let back = read_path(&f, None).unwrap();
        assert_eq!(back.len(), frames.len());
        assert!(back.iter().zip(&frames).all(|(a, b)| a.distance(b) < 1e-14));
        let g = dir.path().join("states.csv");
        std::fs::write(&g, "t,phi,theta\n1.0,0.3,0.0\n1.0,0.3,0.05\n").unwrap();
        assert!(read_path(&g, None).is_err());
        assert_eq!(read_path(&g, Some(&p)).unwrap().len(), 2);
    }
}
