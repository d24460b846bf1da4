//! File formats: observation CSV, binary path grids, curve CSV, matrix dumps,
//! Lepski reports and the Monte Carlo report/plot files.

use std::io::{self, Read, Write};

use thiserror::Error;

use crate::adaptive::LepskiResult;
use crate::estimators::CurveEstimate;
use crate::harness::{EmittedCurve, RmiseReport};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::sde_sim::{ObservationSet, PathGrid, SimError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Observations(#[from] SimError),
}

/// C's `%.17g`: shortest of fixed/exponent notation, trailing zeros removed.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let fixed = format!("{:.*}", (P - 1 - exp) as usize, x);
        strip_zeros(&fixed).to_string()
    } else {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn g<T: Real>(x: T) -> String {
    format_g17(x.as_f64())
}

pub fn write_observations<T: Real, W: Write>(mut w: W, obs: &ObservationSet<T>) -> Result<(), IoError> {
    writeln!(w, "tau,x")?;
    for (&t, &x) in obs.times().iter().zip(obs.states()) {
        writeln!(w, "{},{}", g(t), g(x))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_observations<T: Real, R: Read>(r: R) -> Result<ObservationSet<T>, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(r);
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "tau" || &headers[1] != "x" {
        return Err(IoError::Format(format!(
            "expected header `tau,x`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let parse = |field: &str| {
            field
                .parse::<f64>()
                .map_err(|e| IoError::Format(format!("record {}: `{field}`: {e}", line + 1)))
        };
        times.push(T::of(parse(&record[0])?));
        states.push(T::of(parse(&record[1])?));
    }
    Ok(ObservationSet::new(times, states)?)
}

/// Little-endian `u64` count followed by the `f64` states.
pub fn write_path_grid<T: Real, W: Write>(mut w: W, path: &PathGrid<T>) -> Result<(), IoError> {
    w.write_all(&(path.states.len() as u64).to_le_bytes())?;
    for &x in &path.states {
        w.write_all(&x.as_f64().to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_path_grid<R: Read>(mut r: R) -> Result<Vec<f64>, IoError> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word);
    let n = usize::try_from(n).map_err(|_| IoError::Format(format!("count {n} too large")))?;
    let mut out = Vec::with_capacity(n.min(1 << 24));
    for i in 0..n {
        r.read_exact(&mut word)
            .map_err(|_| IoError::Format(format!("truncated after {i} of {n} values")))?;
        out.push(f64::from_le_bytes(word));
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(IoError::Format(format!("{} trailing bytes", rest.len())));
    }
    Ok(out)
}

/// `x,value` rows after `#` lines recording `J`, `N`, kind and flags.
pub fn write_curve<T: Real, W: Write>(
    mut w: W,
    curve: &CurveEstimate<T>,
    sample_size: usize,
) -> Result<(), IoError> {
    writeln!(w, "# J={}", curve.dim.saturating_sub(1))?;
    writeln!(w, "# dim={}", curve.dim)?;
    writeln!(w, "# N={sample_size}")?;
    writeln!(w, "# kind={}", curve.kind.name())?;
    writeln!(w, "# degenerate_points={}", curve.degenerate_points)?;
    writeln!(w, "# thresholded={}", curve.thresholded)?;
    writeln!(w, "x,value")?;
    for (&x, &v) in curve.grid.iter().zip(&curve.values) {
        writeln!(w, "{},{}", g(x), g(v))?;
    }
    w.flush()?;
    Ok(())
}

/// Row-major CSV, one matrix row per line.
pub fn write_matrix<T: Real, W: Write>(mut w: W, m: &Matrix<T>) -> Result<(), IoError> {
    for i in 0..m.rows() {
        let row: Vec<String> = m.row(i).iter().map(|&v| g(v)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn lepski_report_text<T: Real>(r: &LepskiResult<T>) -> String {
    let mut s = String::new();
    s.push_str(&format!("chosen dim: {} (J = {})\n", r.chosen_dim, r.chosen_dim.saturating_sub(1)));
    s.push_str(&format!("fallback to largest candidate: {}\n\n", r.fallback));
    s.push_str("dim   threshold\n");
    for (d, t) in r.dims.iter().zip(&r.thresholds) {
        s.push_str(&format!("{d:>3}   {:.6e}\n", t.as_f64()));
    }
    s.push_str("\ndistance matrix\n     ");
    for d in &r.dims {
        s.push_str(&format!("{d:>10}"));
    }
    s.push('\n');
    for (i, d) in r.dims.iter().enumerate() {
        s.push_str(&format!("{d:>3}  "));
        for j in 0..r.dims.len() {
            s.push_str(&format!("{:>10.3e}", r.distances[(i, j)].as_f64()));
        }
        s.push('\n');
    }
    s
}

/// `dim,threshold,max_distance_to_larger,chosen` per candidate.
pub fn write_lepski_csv<T: Real, W: Write>(mut w: W, r: &LepskiResult<T>) -> Result<(), IoError> {
    writeln!(w, "dim,threshold,max_distance_to_larger,chosen")?;
    let k = r.dims.len();
    for i in 0..k {
        let max = (i + 1..k)
            .map(|j| r.distances[(j, i)].as_f64())
            .fold(0.0, f64::max);
        writeln!(
            w,
            "{},{},{},{}",
            r.dims[i],
            g(r.thresholds[i]),
            format_g17(max),
            r.dims[i] == r.chosen_dim
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `scheme,N,estimator,dim,rmise,mc_se,failures`.
pub fn write_report_csv<W: Write>(mut w: W, report: &RmiseReport) -> Result<(), IoError> {
    writeln!(w, "scheme,N,estimator,dim,rmise,mc_se,failures")?;
    for row in report.rows() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            row.scheme,
            row.sample_size,
            row.estimator,
            row.dim,
            format_g17(row.rmise),
            format_g17(row.mc_se),
            row.failures
        )?;
    }
    w.flush()?;
    Ok(())
}

/// `x,true,estimate` for one emitted replication.
pub fn write_plot_data<W: Write>(mut w: W, curve: &EmittedCurve) -> Result<(), IoError> {
    writeln!(w, "x,true,estimate")?;
    for ((&x, &t), &e) in curve.grid.iter().zip(&curve.truth).zip(&curve.estimate) {
        writeln!(w, "{},{},{}", format_g17(x), format_g17(t), format_g17(e))?;
    }
    w.flush()?;
    Ok(())
}

/// Plot-data file name for an emitted replication.
pub fn plot_file_name(curve: &EmittedCurve) -> String {
    format!(
        "curve_{}_N{}_rep{:04}.csv",
        curve.scheme, curve.sample_size, curve.replication
    )
}

/// Human-readable table: oracle and adaptive RMISE per scheme and `N`.
pub fn report_table(report: &RmiseReport) -> String {
    let mut s = format!(
        "{:<14}{:>7}{:>6}{:>11}{:>10}{:>6}{:>11}{:>10}{:>11}{:>9}\n",
        "scheme", "N", "dim", "oracle", "se", "adim", "adaptive", "se", "baseline", "failures"
    );
    for c in &report.cells {
        let (adim, ar, ase) = match &c.adaptive {
            Some(a) => (a.modal_dim.to_string(), format!("{:.4}", a.stat.rmise), format!("{:.4}", a.stat.mc_se)),
            None => ("-".into(), "-".into(), "-".into()),
        };
        let base = c
            .baseline_oracle
            .map(|(_, b)| format!("{:.4}", b.rmise))
            .unwrap_or_else(|| "-".into());
        s.push_str(&format!(
            "{:<14}{:>7}{:>6}{:>11.4}{:>10.4}{:>6}{:>11}{:>10}{:>11}{:>9}\n",
            c.scheme, c.sample_size, c.oracle_dim, c.oracle.rmise, c.oracle.mc_se, adim, ar, ase, base, c.failures
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_matches_printf() {
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(0.25), "0.25");
        assert_eq!(format_g17(1.0), "1");
        assert_eq!(format_g17(0.0), "0");
        assert_eq!(format_g17(-2.5), "-2.5");
        assert_eq!(format_g17(1e-5), "1.0000000000000001e-05");
        assert_eq!(format_g17(1e20), "1e+20");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(0.0001), "0.0001");
        assert_eq!(format_g17(f64::NAN), "nan");
    }

    #[test]
    fn g17_round_trips() {
        for &x in &[std::f64::consts::PI, 1.0 / 3.0, 5e-324, 1.7976931348623157e308, 0.001] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn observation_round_trip() {
        let obs = ObservationSet::new(vec![0.0, 0.1, 0.35], vec![0.5, 1.0 / 3.0, 0.0]).unwrap();
        let mut buf = Vec::new();
        write_observations(&mut buf, &obs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("tau,x\n0,0.5\n0.10000000000000001,"));
        let back: ObservationSet<f64> = read_observations(buf.as_slice()).unwrap();
        assert_eq!(back, obs);
        assert!(read_observations::<f64, _>("t,x\n0,0.5\n".as_bytes()).is_err());
        assert!(read_observations::<f64, _>("tau,x\n0,1.5\n".as_bytes()).is_err());
    }

    #[test]
    fn path_grid_layout() {
        let path = PathGrid {
            step: 0.5,
            horizon: 1.0,
            states: vec![0.5, 0.25, 1.0],
        };
        let mut buf = Vec::new();
        write_path_grid(&mut buf, &path).unwrap();
        assert_eq!(buf.len(), 8 + 24);
        assert_eq!(&buf[..8], &3u64.to_le_bytes());
        assert_eq!(&buf[16..24], &0.25f64.to_le_bytes());
        assert_eq!(read_path_grid(buf.as_slice()).unwrap(), path.states);
        assert!(read_path_grid(&buf[..20]).is_err());
    }

    #[test]
    fn matrix_rows() {
        let m = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.5, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "1,0.5\n0.5,2\n");
    }
}
