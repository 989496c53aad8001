//! Molpro FCIDUMP files.
//!
//! A namelist header `&FCI NORB=..,NELEC=..,MS2=.., ... &END` (or `/`) is
//! followed by records `value i j k l` with 1-based orbital indices:
//! `(ij|kl)` when all four are set, `h_ij` when `k = l = 0`, an orbital energy
//! (ignored) when only `i` is set and the core energy when all are zero.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use qpde_core::fermion::FermionicIntegrals;

use crate::error::{QpdeError, Result};

/// Two records naming the same symmetry-equivalent integral must agree to this tolerance.
pub const SYMMETRY_TOL: f64 = 1e-10;

pub fn parse_fcidump(path: impl AsRef<Path>) -> Result<FermionicIntegrals> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| QpdeError::Parse {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_fcidump_str(&text, &path.display().to_string())
}

struct Header {
    norb: usize,
    nelec: usize,
    ms2: i64,
}

fn fail(source: &str, line: usize, message: impl Into<String>) -> QpdeError {
    QpdeError::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses FCIDUMP text; `source` names the input in error messages.
pub fn parse_fcidump_str(text: &str, source: &str) -> Result<FermionicIntegrals> {
    let lines: Vec<&str> = text.lines().collect();
    let start = lines
        .iter()
        .position(|l| !l.trim().is_empty())
        .ok_or_else(|| fail(source, 1, "empty file"))?;
    if !lines[start].trim_start().to_ascii_uppercase().starts_with("&FCI") {
        return Err(fail(source, start + 1, "missing &FCI header"));
    }
    let mut header_text = String::new();
    let mut end = None;
    for (k, line) in lines.iter().enumerate().skip(start) {
        let upper = line.to_ascii_uppercase();
        let (body, closed) = match upper.find("&END") {
            Some(p) => (&upper[..p], true),
            None if upper.trim() == "/" || upper.trim_end().ends_with('/') => (upper.trim_end().trim_end_matches('/'), true),
            None => (upper.as_str(), false),
        };
        header_text.push_str(body.replacen("&FCI", " ", 1).as_str());
        header_text.push(' ');
        if closed {
            end = Some(k);
            break;
        }
    }
    let end = end.ok_or_else(|| fail(source, lines.len(), "header is not terminated by &END or /"))?;
    let header = parse_header(&header_text).map_err(|m| fail(source, start + 1, m))?;
    let n = header.norb;
    let mut ints = FermionicIntegrals::zeros(n, header.nelec);
    ints.ms2 = header.ms2;
    let mut seen: HashMap<(usize, usize, usize, usize), (f64, usize)> = HashMap::new();
    for (k, line) in lines.iter().enumerate().skip(end + 1) {
        let lineno = k + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 5 {
            return Err(fail(source, lineno, format!("expected `value i j k l`, found {} fields", fields.len())));
        }
        if fields[0].starts_with('(') || fields[0].contains(',') {
            return Err(fail(source, lineno, format!("non-real value `{}`", fields[0])));
        }
        let value: f64 = fields[0]
            .replace(['D', 'd'], "E")
            .parse()
            .map_err(|_| fail(source, lineno, format!("bad value `{}`", fields[0])))?;
        if !value.is_finite() {
            return Err(fail(source, lineno, format!("non-finite value `{}`", fields[0])));
        }
        let mut idx = [0usize; 4];
        for (slot, f) in idx.iter_mut().zip(&fields[1..]) {
            let v: i64 = f.parse().map_err(|_| fail(source, lineno, format!("bad index `{}`", f)))?;
            if v < 0 || v as usize > n {
                return Err(fail(source, lineno, format!("index {} outside 0..={}", v, n)));
            }
            *slot = v as usize;
        }
        let [i, j, kk, l] = idx;
        match (i > 0, j > 0, kk > 0, l > 0) {
            (true, true, true, true) => {
                let (p, q, r, s) = (i - 1, j - 1, kk - 1, l - 1);
                let key = canonical(p, q, r, s);
                if let Some(&(old, at)) = seen.get(&key) {
                    if (old - value).abs() > SYMMETRY_TOL {
                        return Err(fail(
                            source,
                            lineno,
                            format!("({}{}|{}{}) = {} conflicts with {} on line {}", i, j, kk, l, value, old, at),
                        ));
                    }
                }
                seen.insert(key, (value, lineno));
                ints.set_eri(p, q, r, s, value);
            }
            (true, true, false, false) => {
                let key = (usize::MAX, (i - 1).max(j - 1), (i - 1).min(j - 1), 0);
                if let Some(&(old, at)) = seen.get(&key) {
                    if (old - value).abs() > SYMMETRY_TOL {
                        return Err(fail(source, lineno, format!("h_{}{} = {} conflicts with {} on line {}", i, j, value, old, at)));
                    }
                }
                seen.insert(key, (value, lineno));
                ints.set_h(i - 1, j - 1, value);
            }
            (true, false, false, false) => {}
            (false, false, false, false) => ints.core_energy = value,
            _ => return Err(fail(source, lineno, format!("unsupported index pattern {} {} {} {}", i, j, kk, l))),
        }
    }
    Ok(ints)
}

fn canonical(p: usize, q: usize, r: usize, s: usize) -> (usize, usize, usize, usize) {
    let a = (p.max(q), p.min(q));
    let b = (r.max(s), r.min(s));
    let (x, y) = if a >= b { (a, b) } else { (b, a) };
    (x.0, x.1, y.0, y.1)
}

fn parse_header(text: &str) -> std::result::Result<Header, String> {
    let spaced = text.replace(',', " ").replace('=', " = ");
    let tokens: Vec<&str> = spaced.split_whitespace().collect();
    let mut values: HashMap<String, Vec<String>> = HashMap::new();
    let mut current: Option<String> = None;
    let mut k = 0;
    while k < tokens.len() {
        if k + 1 < tokens.len() && tokens[k + 1] == "=" {
            current = Some(tokens[k].to_string());
            values.entry(tokens[k].to_string()).or_default();
            k += 2;
            continue;
        }
        match &current {
            Some(key) => values.get_mut(key).expect("inserted").push(tokens[k].to_string()),
            None => return Err(format!("unexpected header token `{}`", tokens[k])),
        }
        k += 1;
    }
    let int = |key: &str| -> std::result::Result<i64, String> {
        let v = values.get(key).ok_or_else(|| format!("header lacks {}", key))?;
        match v.as_slice() {
            [x] => x.parse().map_err(|_| format!("{} = `{}` is not an integer", key, x)),
            _ => Err(format!("{} needs exactly one value", key)),
        }
    };
    let norb = int("NORB")?;
    let nelec = int("NELEC")?;
    let ms2 = if values.contains_key("MS2") { int("MS2")? } else { 0 };
    if norb < 1 {
        return Err(format!("NORB = {}", norb));
    }
    if nelec < 0 || nelec > 2 * norb {
        return Err(format!("NELEC = {} with NORB = {}", nelec, norb));
    }
    Ok(Header {
        norb: norb as usize,
        nelec: nelec as usize,
        ms2,
    })
}

/// FCIDUMP text of the unique nonzero integrals; parsing it returns identical values.
pub fn write_fcidump(ints: &FermionicIntegrals) -> String {
    let n = ints.n_orb;
    let mut out = String::new();
    let _ = writeln!(out, " &FCI NORB={},NELEC={},MS2={},", n, ints.n_elec, ints.ms2);
    let _ = writeln!(out, "  ORBSYM={}", "1,".repeat(n));
    let _ = writeln!(out, "  ISYM=1,");
    let _ = writeln!(out, " &END");
    for p in 0..n {
        for q in 0..=p {
            for r in 0..n {
                for s in 0..=r {
                    if (r, s) > (p, q) {
                        continue;
                    }
                    let v = ints.eri(p, q, r, s);
                    if v != 0.0 {
                        let _ = writeln!(out, "{:e} {} {} {} {}", v, p + 1, q + 1, r + 1, s + 1);
                    }
                }
            }
        }
    }
    for p in 0..n {
        for q in 0..=p {
            let v = ints.h(p, q);
            if v != 0.0 {
                let _ = writeln!(out, "{:e} {} {} 0 0", v, p + 1, q + 1);
            }
        }
    }
    let _ = writeln!(out, "{:e} 0 0 0 0", ints.core_energy);
    out
}
