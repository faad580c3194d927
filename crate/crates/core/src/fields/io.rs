//! Field serialization.
//!
//! Binary layout: one line of compact JSON (chart metadata, field kind,
//! component count, interpolation order) terminated by `\n`, followed by the
//! samples as little-endian `f64`, nodes in row-major order with the
//! components of each node stored contiguously.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Field, InterpOrder, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::geometry::ChartDomain;
use crate::scalar::Real;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FieldHeader<T> {
    pub chart: ChartDomain<T>,
    pub kind: String,
    pub components: usize,
    pub interp: InterpOrder,
}

fn planes<T: Real>(f: &Field<T>) -> Vec<&[T]> {
    match f {
        Field::Scalar(s) => vec![s.values()],
        Field::Vector(v) => v.components().iter().map(|c| c.as_slice()).collect(),
        Field::Complex(re, im) => vec![re.values(), im.values()],
    }
}

fn interp_of<T: Real>(f: &Field<T>) -> InterpOrder {
    match f {
        Field::Scalar(s) => s.interp(),
        Field::Vector(v) => v.interp(),
        Field::Complex(re, _) => re.interp(),
    }
}

pub fn write_binary<T: Real, W: Write>(f: &Field<T>, mut w: W) -> Result<()> {
    let planes = planes(f);
    let header = FieldHeader {
        chart: (**f.chart()).clone(),
        kind: f.kind_name().to_string(),
        components: planes.len(),
        interp: interp_of(f),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let n = f.chart().node_count();
    let mut buf = Vec::with_capacity(n * planes.len() * 8);
    for i in 0..n {
        for p in &planes {
            buf.extend_from_slice(&p[i].as_f64().to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_binary<T: Real, R: BufRead>(mut r: R) -> Result<Field<T>> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FieldHeader<T> = serde_json::from_str(line.trim_end())?;
    let chart = Arc::new(header.chart);
    let n = chart.node_count();
    let k = header.components;
    let mut raw = vec![0u8; n * k * 8];
    r.read_exact(&mut raw)?;
    let mut planes = vec![Vec::with_capacity(n); k];
    for (idx, chunk) in raw.chunks_exact(8).enumerate() {
        let mut b = [0u8; 8];
        b.copy_from_slice(chunk);
        planes[idx % k].push(T::lit(f64::from_le_bytes(b)));
    }
    match (header.kind.as_str(), k) {
        ("scalar", 1) => Ok(Field::Scalar(ScalarField::from_parts(chart, planes.remove(0), header.interp))),
        ("vector", _) => Ok(Field::Vector(VectorField::new(chart, planes, header.interp)?)),
        ("complex", 2) => {
            let im = planes.pop().unwrap_or_default();
            let re = planes.pop().unwrap_or_default();
            Ok(Field::Complex(
                ScalarField::from_parts(chart.clone(), re, header.interp),
                ScalarField::from_parts(chart, im, header.interp),
            ))
        }
        (kind, k) => Err(Error::KindMismatch(format!("header kind {kind} with {k} components"))),
    }
}

/// Plot-ready CSV: coordinates then components, one row per node.
pub fn write_csv<T: Real, W: Write>(f: &Field<T>, w: W) -> Result<()> {
    let chart = f.chart();
    let dim = chart.dim();
    let planes = planes(f);
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<String> = (0..dim).map(|a| format!("x{a}")).collect();
    match f {
        Field::Scalar(_) => header.push("value".into()),
        Field::Vector(_) => header.extend((0..dim).map(|a| format!("v{a}"))),
        Field::Complex(..) => header.extend(["re".to_string(), "im".to_string()]),
    }
    wtr.write_record(&header).map_err(csv_err)?;
    for i in 0..chart.node_count() {
        let p = chart.node(i);
        let mut row: Vec<String> = (0..dim).map(|a| fmt_f64(p[a].as_f64())).collect();
        row.extend(planes.iter().map(|pl| fmt_f64(pl[i].as_f64())));
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Shortest round-trip formatting; NaN is written as `nan`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x}")
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
