//! CSV input and output. Floats are written with 17 significant digits so that
//! they read back bit-for-bit.

use std::io::{Read, Write};

use crate::asymptotics::ConstantsRow;
use crate::error::{Error, Result};
use crate::inteq::GridFunction;
use crate::isotonic::StepDistribution;
use crate::model::{CensoredObservation, Position};
use crate::sim::TableCsvRow;

pub const DATASET_HEADER: [&str; 5] = ["t", "u", "d1", "d2", "d3"];
pub const STEP_HEADER: [&str; 2] = ["knot", "value"];
pub const BIRGE_HEADER: [&str; 3] = ["cell_left", "cell_right", "value"];
pub const SMLE_HEADER: [&str; 3] = ["t", "F_smle", "f_smle"];
pub const PHI_HEADER: [&str; 2] = ["u", "phi"];
pub const TABLE_HEADER: [&str; 9] =
    ["table", "n", "t0", "estimator", "scaled_mse", "scaled_var", "scaled_bias_sq", "mc_se", "asymptotic_ref"];
pub const CONSTANTS_HEADER: [&str; 12] = [
    "t0",
    "target",
    "scheme",
    "birge_c",
    "birge_bias_sq",
    "birge_variance",
    "birge_mse",
    "mle_mse",
    "xi",
    "w_tilde",
    "minimax",
    "var_2z",
];

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn write_rows<W: Write, const K: usize>(out: W, header: [&str; K], rows: impl Iterator<Item = [String; K]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_dataset<W: Write>(out: W, observations: &[CensoredObservation]) -> Result<()> {
    write_rows(
        out,
        DATASET_HEADER,
        observations.iter().map(|o| {
            let [a, b, c] = o.delta.indicators();
            [fmt_f64(o.t), fmt_f64(o.u), a.to_string(), b.to_string(), c.to_string()]
        }),
    )
}

fn parse_field<T: std::str::FromStr>(raw: &str, row: usize, field: &str) -> Result<T> {
    raw.trim().parse().map_err(|_| Error::Parse(format!("row {row}, field `{field}`: cannot parse '{raw}'")))
}

/// Reads `t,u,d1,d2,d3` rows; errors name the row and field.
pub fn read_dataset<R: Read>(input: R) -> Result<Vec<CensoredObservation>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != DATASET_HEADER {
        return Err(Error::Parse(format!("dataset header must be `t,u,d1,d2,d3`, found `{}`", header.join(","))));
    }
    let mut obs = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        if rec.len() != 5 {
            return Err(Error::Parse(format!("row {row}: expected 5 fields, found {}", rec.len())));
        }
        let t: f64 = parse_field(&rec[0], row, "t")?;
        let u: f64 = parse_field(&rec[1], row, "u")?;
        let mut d = [0u8; 3];
        for (k, name) in ["d1", "d2", "d3"].iter().enumerate() {
            d[k] = parse_field(&rec[2 + k], row, name)?;
        }
        let delta = Position::from_indicators(d).map_err(|e| Error::Parse(format!("row {row}, fields `d1,d2,d3`: {e}")))?;
        let o = CensoredObservation::new(t, u, delta).map_err(|e| Error::Parse(format!("row {row}, fields `t,u`: {e}")))?;
        obs.push(o);
    }
    if obs.is_empty() {
        return Err(Error::Parse("dataset has no rows".into()));
    }
    Ok(obs)
}

pub fn write_step<W: Write>(out: W, step: &StepDistribution) -> Result<()> {
    write_rows(out, STEP_HEADER, step.knots().iter().zip(step.values()).map(|(k, v)| [fmt_f64(*k), fmt_f64(*v)]))
}

pub fn write_birge_curve<W: Write>(out: W, cells: &[(f64, f64, f64)]) -> Result<()> {
    write_rows(out, BIRGE_HEADER, cells.iter().map(|&(a, b, v)| [fmt_f64(a), fmt_f64(b), fmt_f64(v)]))
}

pub fn write_smle_curve<W: Write>(out: W, curve: &[(f64, f64, f64)]) -> Result<()> {
    write_rows(out, SMLE_HEADER, curve.iter().map(|&(t, f, d)| [fmt_f64(t), fmt_f64(f), fmt_f64(d)]))
}

pub fn write_phi<W: Write>(out: W, phi: &GridFunction) -> Result<()> {
    write_rows(out, PHI_HEADER, phi.points().zip(phi.values()).map(|(u, p)| [fmt_f64(u), fmt_f64(*p)]))
}

pub fn write_table<W: Write>(out: W, rows: &[TableCsvRow]) -> Result<()> {
    write_rows(
        out,
        TABLE_HEADER,
        rows.iter().map(|r| {
            [
                r.table.to_string(),
                r.row.n.to_string(),
                fmt_f64(r.row.t0),
                r.row.estimator.clone(),
                fmt_f64(r.row.scaled_mse),
                fmt_f64(r.row.scaled_var),
                fmt_f64(r.row.scaled_bias_sq),
                fmt_f64(r.row.mc_standard_error),
                fmt_opt(r.asymptotic_ref),
            ]
        }),
    )
}

pub fn write_constants<W: Write>(out: W, rows: &[ConstantsRow], var_2z: f64) -> Result<()> {
    write_rows(
        out,
        CONSTANTS_HEADER,
        rows.iter().map(|r| {
            [
                fmt_f64(r.t0),
                r.target.to_string(),
                r.scheme.to_string(),
                fmt_f64(r.birge_c),
                fmt_f64(r.birge.bias_sq()),
                fmt_f64(r.birge.variance),
                fmt_f64(r.birge.mse),
                fmt_f64(r.mle_mse),
                fmt_opt(r.xi),
                fmt_opt(r.w_tilde),
                fmt_opt(r.minimax),
                fmt_f64(var_2z),
            ]
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_dataset, ObservationScheme, TargetDistribution};

    #[test]
    fn dataset_round_trip_is_exact() {
        let d = generate_dataset(TargetDistribution::PowerDecay(4), ObservationScheme::Separated(0.1), 500, 12).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &d.observations).unwrap();
        assert!(buf.starts_with(b"t,u,d1,d2,d3\n"));
        assert_eq!(read_dataset(buf.as_slice()).unwrap(), d.observations);
    }

    #[test]
    fn malformed_rows_name_the_field() {
        let bad = "t,u,d1,d2,d3\n0.1,0.5,1,0,0\n0.2,abc,0,1,0\n";
        let msg = read_dataset(bad.as_bytes()).unwrap_err().to_string();
        assert!(msg.contains("row 2") && msg.contains("`u`"), "{msg}");

        let bad = "t,u,d1,d2,d3\n0.1,0.5,1,1,0\n";
        assert!(read_dataset(bad.as_bytes()).unwrap_err().to_string().contains("d1,d2,d3"));

        let bad = "t,u,d1,d2,d3\n0.6,0.5,1,0,0\n";
        assert!(read_dataset(bad.as_bytes()).unwrap_err().to_string().contains("`t,u`"));

        assert!(read_dataset("a,b\n1,2\n".as_bytes()).is_err());
        assert!(read_dataset("t,u,d1,d2,d3\n".as_bytes()).is_err());
    }

    #[test]
    fn seventeen_significant_digits() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 0.999_999_999_999_999_9] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn curve_headers() {
        let step = StepDistribution::new(vec![0.2, 0.7], vec![0.4, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_step(&mut buf, &step).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().count(), 3);
        assert!(s.starts_with("knot,value\n"));
    }
}
