//! Plain-text curve and coupling files.
//!
//! Curve files carry one `# channel` header per column:
//!
//! ```text
//! # channel <m> <Λ> <2S+1> "<label>" <asymptotic energy> <H|He> <n> <l>
//! ```
//!
//! followed by rows `R U_1 ... U_n`. Coupling files declare columns with
//! `# column <radial|L+|L-> <m> <Λ> <m'> <Λ'>` and optional
//! `# tail <column> <zero|hold|switch R_s w atomic>` lines. Other `#` lines are
//! comments. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{
    Arrangement, ChannelRef, CouplingFunction, CouplingKind, CouplingSet, CurveSet,
    ElectronicChannel, RadialMesh, TailPolicy,
};
use crate::error::{Error, Result};

fn tokens(line: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    while let Some(&c) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
        } else if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    Some('"') => break,
                    Some(ch) => s.push(ch),
                    None => return Err("unterminated quoted label".into()),
                }
            }
            out.push(s);
        } else {
            let mut s = String::new();
            while let Some(&ch) = chars.peek() {
                if ch.is_whitespace() {
                    break;
                }
                s.push(ch);
                chars.next();
            }
            out.push(s);
        }
    }
    Ok(out)
}

struct Table {
    headers: Vec<(usize, Vec<String>)>,
    mesh: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

fn read_table(path: &Path, text: &str, directive: &[&str]) -> Result<Table> {
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut headers = Vec::new();
    let mut mesh = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let toks = tokens(rest).map_err(|m| perr(lineno, m))?;
            if toks.first().is_some_and(|t| directive.contains(&t.as_str())) {
                headers.push((lineno, toks));
            }
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| perr(lineno, format!("bad number {t:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if columns.is_empty() {
            columns = vec![Vec::new(); values.len().saturating_sub(1)];
        }
        if values.len() != columns.len() + 1 {
            return Err(perr(
                lineno,
                format!("expected {} columns, found {}", columns.len() + 1, values.len()),
            ));
        }
        mesh.push(values[0]);
        for (col, v) in columns.iter_mut().zip(&values[1..]) {
            col.push(*v);
        }
    }
    Ok(Table {
        headers,
        mesh,
        columns,
    })
}

fn parse_num<T: std::str::FromStr>(path: &Path, line: usize, tok: &str, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("invalid {what} {tok:?}"),
    })
}

fn parse_channel(path: &Path, line: usize, toks: &[String]) -> Result<ElectronicChannel> {
    if toks.len() != 9 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!(
                "channel header needs 8 fields (m Λ 2S+1 \"label\" energy arrangement n l), found {}",
                toks.len() - 1
            ),
        });
    }
    let arrangement = Arrangement::from_tag(&toks[6]).ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("unknown arrangement {:?} (expected H or He)", toks[6]),
    })?;
    Ok(ElectronicChannel {
        m: parse_num(path, line, &toks[1], "index")?,
        lambda: parse_num(path, line, &toks[2], "Λ")?,
        multiplicity: parse_num(path, line, &toks[3], "multiplicity")?,
        label: toks[4].clone(),
        asymptotic_energy: parse_num(path, line, &toks[5], "energy")?,
        arrangement,
        n: parse_num(path, line, &toks[7], "n")?,
        l: parse_num(path, line, &toks[8], "l")?,
    })
}

pub fn parse_curve_set(path: &Path, text: &str) -> Result<CurveSet> {
    let table = read_table(path, text, &["channel"])?;
    let channels = table
        .headers
        .iter()
        .map(|(line, toks)| parse_channel(path, *line, toks))
        .collect::<Result<Vec<_>>>()?;
    if channels.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "no '# channel' header lines".into(),
        });
    }
    if table.columns.len() != channels.len() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: table.headers.last().map_or(1, |h| h.0),
            message: format!(
                "{} channel headers but {} data columns",
                channels.len(),
                table.columns.len()
            ),
        });
    }
    let mesh = RadialMesh::new(table.mesh)?;
    CurveSet::new(channels, mesh, table.columns)
}

pub fn load_curve_set(path: impl AsRef<Path>) -> Result<CurveSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_curve_set(path, &text)
}

pub fn curve_set_to_string(set: &CurveSet) -> String {
    let mut out = String::from("# ctscatter curves\n");
    for ch in set.channels() {
        writeln!(
            out,
            "# channel {} {} {} \"{}\" {} {} {} {}",
            ch.m,
            ch.lambda,
            ch.multiplicity,
            ch.label,
            ch.asymptotic_energy,
            ch.arrangement.tag(),
            ch.n,
            ch.l
        )
        .unwrap();
    }
    for (i, r) in set.mesh().points().iter().enumerate() {
        write!(out, "{r}").unwrap();
        for c in 0..set.len() {
            write!(out, " {}", set.tabulated(c)[i]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_curve_set(set: &CurveSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, curve_set_to_string(set)).map_err(|e| Error::io(path, e))
}

pub fn parse_coupling_set(path: &Path, text: &str) -> Result<CouplingSet> {
    let table = read_table(path, text, &["column", "tail"])?;
    let perr = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut specs = Vec::new();
    let mut tails = Vec::new();
    for (line, toks) in &table.headers {
        if toks[0] == "column" {
            if toks.len() != 6 {
                return Err(perr(*line, "column header needs: kind m Λ m' Λ'".into()));
            }
            let kind = CouplingKind::from_tag(&toks[1])
                .ok_or_else(|| perr(*line, format!("unknown coupling kind {:?}", toks[1])))?;
            let from = ChannelRef {
                m: parse_num(path, *line, &toks[2], "m")?,
                lambda: parse_num(path, *line, &toks[3], "Λ")?,
            };
            let to = ChannelRef {
                m: parse_num(path, *line, &toks[4], "m'")?,
                lambda: parse_num(path, *line, &toks[5], "Λ'")?,
            };
            specs.push((kind, from, to));
        } else {
            let col: usize = toks
                .get(1)
                .ok_or_else(|| perr(*line, "tail needs a column index".into()))
                .and_then(|t| parse_num(path, *line, t, "column index"))?;
            let policy = match toks.get(2).map(String::as_str) {
                Some("zero") => TailPolicy::Zero,
                Some("hold") => TailPolicy::Hold,
                Some("switch") if toks.len() == 6 => TailPolicy::Switch {
                    r_s: parse_num(path, *line, &toks[3], "R_s")?,
                    width: parse_num(path, *line, &toks[4], "width")?,
                    atomic_value: parse_num(path, *line, &toks[5], "atomic value")?,
                },
                _ => return Err(perr(*line, "tail must be zero, hold or switch R_s w atomic".into())),
            };
            tails.push((*line, col, policy));
        }
    }
    if specs.len() != table.columns.len() {
        return Err(perr(
            table.headers.last().map_or(1, |h| h.0),
            format!("{} column headers but {} data columns", specs.len(), table.columns.len()),
        ));
    }
    let mesh = RadialMesh::new(table.mesh)?;
    let mut policies: Vec<TailPolicy> = specs
        .iter()
        .map(|(kind, _, _)| match kind {
            CouplingKind::Radial => TailPolicy::Zero,
            _ => TailPolicy::Hold,
        })
        .collect();
    for (line, col, policy) in tails {
        if col == 0 || col > policies.len() {
            return Err(perr(line, format!("tail refers to missing column {col}")));
        }
        policies[col - 1] = policy;
    }
    let functions = specs
        .into_iter()
        .zip(table.columns)
        .zip(policies)
        .map(|(((kind, from, to), values), tail)| {
            CouplingFunction::new(kind, from, to, &mesh, values, tail)
        })
        .collect::<Result<Vec<_>>>()?;
    CouplingSet::new(mesh, functions)
}

pub fn load_coupling_set(path: impl AsRef<Path>) -> Result<CouplingSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coupling_set(path, &text)
}

pub fn coupling_set_to_string(set: &CouplingSet) -> String {
    let mut out = String::from("# ctscatter couplings\n");
    let funcs: Vec<_> = set.all().collect();
    for f in &funcs {
        writeln!(
            out,
            "# column {} {} {} {} {}",
            f.kind.tag(),
            f.from.m,
            f.from.lambda,
            f.to.m,
            f.to.lambda
        )
        .unwrap();
    }
    for (i, f) in funcs.iter().enumerate() {
        let default = match f.kind {
            CouplingKind::Radial => TailPolicy::Zero,
            _ => TailPolicy::Hold,
        };
        if f.tail != default {
            match f.tail {
                TailPolicy::Zero => writeln!(out, "# tail {} zero", i + 1),
                TailPolicy::Hold => writeln!(out, "# tail {} hold", i + 1),
                TailPolicy::Switch {
                    r_s,
                    width,
                    atomic_value,
                } => writeln!(out, "# tail {} switch {r_s} {width} {atomic_value}", i + 1),
            }
            .unwrap();
        }
    }
    for (j, r) in set.mesh().points().iter().enumerate() {
        write!(out, "{r}").unwrap();
        for f in &funcs {
            write!(out, " {}", f.tabulated()[j]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_coupling_set(set: &CouplingSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, coupling_set_to_string(set)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_zero_single_channel() {
        let text = "# channel 1 0 1 \"H(2s)\" 0 H 2 0\n1.0 0\n2.0 0\n3.0 0\n4.0 0\n";
        let set = parse_curve_set(Path::new("mem"), text).unwrap();
        assert_eq!(set.len(), 1);
        assert!(set.tabulated(0).iter().all(|&u| u == 0.0));
    }

    #[test]
    fn malformed_header_reports_line() {
        let text = "# comment\n# channel 1 0 1 \"H(2s)\" 0 H 2\n1 0\n2 0\n3 0\n4 0\n";
        match parse_curve_set(Path::new("mem"), text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_mesh_point_is_mesh_error() {
        let text = "# channel 1 0 1 \"x\" 0 H 2 0\n1.0 0\n1.0 0\n2.0 0\n3.0 0\n";
        assert!(matches!(parse_curve_set(Path::new("mem"), text), Err(Error::Mesh(_))));
    }

    #[test]
    fn coupling_round_trip_keeps_tail_policy() {
        let text = "# column radial 1 0 2 0\n# column L+ 1 1 2 0\n# tail 2 switch 20 1.5 0\n\
                    1 0.1 1\n2 0.05 2\n3 0.01 3\n4 0 4\n";
        let set = parse_coupling_set(Path::new("mem"), text).unwrap();
        let again = parse_coupling_set(Path::new("mem"), &coupling_set_to_string(&set)).unwrap();
        assert_eq!(
            again.rotational_functions()[0].tail,
            TailPolicy::Switch {
                r_s: 20.0,
                width: 1.5,
                atomic_value: 0.0
            }
        );
        assert_eq!(again.radial_functions()[0].tabulated(), &[0.1, 0.05, 0.01, 0.0]);
    }
}
