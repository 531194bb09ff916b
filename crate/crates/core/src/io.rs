//! Plain-text output: CSV tables with round-trip float formatting and JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::ComplexSpectrum;
use crate::mc::{ExperimentConfig, TrialRecord};
use crate::spectra::radial_cdf;

pub const HISTOGRAM_BINS: usize = 40;

/// 17 significant digits in scientific notation; parses back to the same bits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

/// `trial_index,event_held,min_singular` followed by `re_<label>,im_<label>`
/// per statistic.
pub fn trials_csv(config: &ExperimentConfig, records: &[TrialRecord]) -> String {
    let mut out = String::new();
    let mut header = vec![
        "trial_index".to_string(),
        "event_held".into(),
        "min_singular".into(),
    ];
    for l in config.labels() {
        header.push(format!("re_{l}"));
        header.push(format!("im_{l}"));
    }
    push_row(&mut out, &header);
    for r in records {
        let mut row = vec![
            r.trial_index.to_string(),
            u8::from(r.event_held).to_string(),
            r.min_singular.map_or_else(String::new, fmt_f64),
        ];
        for s in &r.statistics {
            row.push(fmt_f64(s.re));
            row.push(fmt_f64(s.im));
        }
        push_row(&mut out, &row);
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn new(values: &[f64], bins: usize) -> Result<Self> {
        if bins == 0 || values.is_empty() {
            return Err(Error::invalid(
                "histogram needs values and at least one bin",
            ));
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::invalid("histogram values must be finite"));
        }
        if hi == lo {
            hi = lo + 1.0;
        }
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for &v in values {
            let k = (((v - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        Ok(Self { lo, hi, counts })
    }

    pub fn edges(&self, k: usize) -> (f64, f64) {
        let w = (self.hi - self.lo) / self.counts.len() as f64;
        (self.lo + k as f64 * w, self.lo + (k + 1) as f64 * w)
    }
}

/// Histograms of the centred real parts, one block of rows per statistic:
/// `statistic,bin,lo,hi,count,density`.
pub fn histogram_csv(
    config: &ExperimentConfig,
    records: &[TrialRecord],
    bins: usize,
) -> Result<String> {
    let mut out = String::from("statistic,bin,lo,hi,count,density\n");
    for (i, label) in config.labels().iter().enumerate() {
        let re: Vec<f64> = records.iter().map(|r| r.statistics[i].re).collect();
        let mean = re.iter().sum::<f64>() / re.len() as f64;
        let centred: Vec<f64> = re.iter().map(|x| x - mean).collect();
        let h = Histogram::new(&centred, bins)?;
        let total = centred.len() as f64;
        for (k, &c) in h.counts.iter().enumerate() {
            let (lo, hi) = h.edges(k);
            let density = c as f64 / (total * (hi - lo));
            push_row(
                &mut out,
                &[
                    label.clone(),
                    k.to_string(),
                    fmt_f64(lo),
                    fmt_f64(hi),
                    c.to_string(),
                    fmt_f64(density),
                ],
            );
        }
    }
    Ok(out)
}

/// `re,im` per eigenvalue.
pub fn eigenvalues_csv(spec: &ComplexSpectrum) -> String {
    let mut out = String::from("re,im\n");
    for v in spec.values() {
        let _ = writeln!(out, "{},{}", fmt_f64(v.re), fmt_f64(v.im));
    }
    out
}

/// `radius,empirical_cdf,theoretical_cdf` over the sorted moduli.
pub fn radial_csv(spec: &ComplexSpectrum, m: usize, sigma: f64) -> String {
    let mut radii: Vec<f64> = spec.values().iter().map(|v| v.norm()).collect();
    radii.sort_by(f64::total_cmp);
    let n = radii.len() as f64;
    let mut out = String::from("radius,empirical_cdf,theoretical_cdf\n");
    for (i, r) in radii.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{}",
            fmt_f64(*r),
            fmt_f64((i + 1) as f64 / n),
            fmt_f64(radial_cdf(*r, m, sigma))
        );
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn float_format_round_trips() {
        for x in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02214076e23,
            0.0,
            -0.0,
            f64::MIN_POSITIVE,
        ] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(f64::NAN), "NaN");
    }

    #[test]
    fn histogram_counts_every_value() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Histogram::new(&xs, HISTOGRAM_BINS).unwrap();
        assert_eq!(h.counts.iter().sum::<usize>(), 1000);
        assert_eq!(h.counts.len(), 40);
        let h = Histogram::new(&[2.0; 5], 4).unwrap();
        assert_eq!(h.counts, vec![5, 0, 0, 0]);
    }

    #[test]
    fn radial_table_ends_at_one() {
        let spec = ComplexSpectrum::new(vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, -0.25)]);
        let text = radial_csv(&spec, 1, 1.0);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2.5000000000000000e-1,5.0000000000000000e-1,6.25"));
        assert!(lines[2].contains(",1.0000000000000000e0,"));
    }
}
