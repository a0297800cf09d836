//! `name:key=value` shorthands for states and subalgebras.
//!
//! States: `m3:z=…`, `m2:x=…`, `tracial:d=…`, `diag:p=a,b,…`.
//! Subalgebras: `diag:n=…`, `full:n=…`, `trivial:n=…`,
//! `factor:dims=2x3,keep=1` (several kept factors joined by `+`).

use std::collections::BTreeMap;
use std::path::Path;

use leafspace::experiments::{m2_symmetric_state, m3_symmetric_state};
use leafspace::{DensityMatrix, SubalgebraSpec};

use crate::error::CliError;
use crate::wire::{parse_json, MatrixJson, SubalgebraJson};

type Res<T> = Result<T, CliError>;

fn split(preset: &str) -> Res<(&str, BTreeMap<String, String>)> {
    let (name, rest) = preset
        .split_once(':')
        .ok_or_else(|| CliError::Input(format!("preset {preset:?}: expected name:key=value")))?;
    let mut args: BTreeMap<String, String> = BTreeMap::new();
    let mut last: Option<String> = None;
    for part in rest.split(',') {
        match part.split_once('=') {
            Some((k, v)) => {
                args.insert(k.trim().to_string(), v.trim().to_string());
                last = Some(k.trim().to_string());
            }
            None => match &last {
                Some(k) => {
                    let v = args.get_mut(k).expect("inserted");
                    v.push(',');
                    v.push_str(part.trim());
                }
                None => return Err(CliError::Input(format!("preset {preset:?}: expected key=value"))),
            },
        }
    }
    Ok((name, args))
}

fn get<'a>(args: &'a BTreeMap<String, String>, key: &str, preset: &str) -> Res<&'a str> {
    args.get(key)
        .map(String::as_str)
        .ok_or_else(|| CliError::Input(format!("preset {preset:?}: missing {key}=")))
}

fn num<T: std::str::FromStr>(s: &str, key: &str) -> Res<T> {
    s.parse().map_err(|_| CliError::Input(format!("{key}: cannot parse {s:?}")))
}

fn list<T: std::str::FromStr>(s: &str, sep: char, key: &str) -> Res<Vec<T>> {
    s.split(sep).map(|x| num(x.trim(), key)).collect()
}

pub fn state_preset(preset: &str) -> Res<DensityMatrix> {
    let (name, args) = split(preset)?;
    Ok(match name {
        "m3" => m3_symmetric_state(num(get(&args, "z", preset)?, "z")?)?,
        "m2" => m2_symmetric_state(num(get(&args, "x", preset)?, "x")?)?,
        "tracial" => {
            let d: usize = num(get(&args, "d", preset)?, "d")?;
            if d == 0 {
                return Err(CliError::Input("tracial: d must be positive".into()));
            }
            DensityMatrix::maximally_mixed(d)
        }
        "diag" => DensityMatrix::diagonal(&list::<f64>(get(&args, "p", preset)?, ',', "p")?)?,
        other => return Err(CliError::Input(format!("unknown state preset {other:?}"))),
    })
}

pub fn subalgebra_preset(preset: &str) -> Res<SubalgebraSpec> {
    let (name, args) = split(preset)?;
    let n = || -> Res<usize> { num(get(&args, "n", preset)?, "n") };
    Ok(match name {
        "diag" => SubalgebraSpec::diagonal(n()?)?,
        "full" => SubalgebraSpec::full(n()?)?,
        "trivial" => SubalgebraSpec::trivial(n()?)?,
        "factor" => {
            let dims: Vec<usize> = list(get(&args, "dims", preset)?, 'x', "dims")?;
            let keep: Vec<usize> = list(get(&args, "keep", preset)?, '+', "keep")?;
            SubalgebraSpec::tensor_factor(&dims, &keep)?
        }
        other => return Err(CliError::Input(format!("unknown subalgebra preset {other:?}"))),
    })
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// A path to an existing file, or else a preset.
pub fn is_file(arg: &str) -> bool {
    Path::new(arg).is_file()
}

pub fn load_state(arg: &str) -> Res<DensityMatrix> {
    if is_file(arg) {
        let m: MatrixJson = parse_json(&read(Path::new(arg))?, arg)?;
        m.to_density(arg)
    } else if arg.contains(':') {
        state_preset(arg)
    } else {
        Err(CliError::Input(format!("{arg}: no such file")))
    }
}

pub fn load_subalgebra(arg: &str) -> Res<SubalgebraSpec> {
    if is_file(arg) {
        let s: SubalgebraJson = parse_json(&read(Path::new(arg))?, arg)?;
        s.to_spec()
    } else if arg.contains(':') {
        subalgebra_preset(arg)
    } else {
        Err(CliError::Input(format!("{arg}: no such file")))
    }
}

pub fn read_file(arg: &str) -> Res<String> {
    read(Path::new(arg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_presets() {
        assert_eq!(state_preset("m3:z=0").unwrap().dim(), 3);
        assert_eq!(state_preset("diag:p=0.5,0.3,0.2").unwrap().dim(), 3);
        assert_eq!(state_preset("tracial:d=4").unwrap(), DensityMatrix::maximally_mixed(4));
        let err = state_preset("m3:z=0.5").unwrap_err().to_string();
        assert!(err.contains("−1/6 ≤ z ≤ 1/3"));
        assert!(state_preset("nope:x=1").is_err());
    }

    #[test]
    fn subalgebra_presets() {
        let a = subalgebra_preset("factor:dims=4x2x2,keep=1+2").unwrap();
        assert_eq!(a, SubalgebraSpec::tensor_factor(&[4, 2, 2], &[1, 2]).unwrap());
        assert_eq!(subalgebra_preset("diag:n=3").unwrap(), SubalgebraSpec::diagonal(3).unwrap());
        assert!(subalgebra_preset("full").is_err());
    }
}
