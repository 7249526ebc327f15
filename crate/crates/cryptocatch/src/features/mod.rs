//! Feature catalog: named, parameterized time-series features over windows.
//!
//! A [`FeatureSpec`] names one feature function with its parameters and the
//! series it reads (packet lengths, or inter-arrival times for names with the
//! `__iat` suffix). Canonical names round-trip through [`FeatureSpec::parse`]
//! and are used as column headers in matrix files.

pub mod functions;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Label, Window};
use functions::FftAttr;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown feature name `{0}`")]
    UnknownName(String),
    #[error("bad parameter in feature name `{0}`")]
    BadParameter(String),
    #[error("matrix has no `{0}` column")]
    MissingColumn(&'static str),
    #[error("matrix row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which series of the window a spec reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SeriesInput {
    /// Packet payload lengths (N values).
    Lengths,
    /// Inter-arrival times (N - 1 values).
    InterArrivals,
}

/// A feature function together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureFn {
    SumValues,
    MeanNAbsoluteMax { n: usize },
    C3 { lag: usize },
    BinnedEntropy { max_bins: usize },
    IndexMassQuantile { q: f64 },
    NumberCwtPeaks { max_width: usize },
    FftCoefficient { k: usize, attr: FftAttr },
    Autocorrelation { lag: usize },
    ArCoefficient { k: usize, order: usize },
    FriedrichCoefficient { coeff: usize, m: usize, r: usize },
    MaxLangevinFixedPoint { m: usize, r: usize },
    Mean,
    Std,
    Min,
    Max,
    Median,
    Variance,
    AbsEnergy,
    MeanAbsChange,
    MovingAverageLast { w: usize },
    SlidingStdMax { w: usize },
}

/// One catalog entry: function, parameters and input series. The canonical
/// name uniquely encodes all three.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSpec {
    pub func: FeatureFn,
    pub input: SeriesInput,
}

impl FeatureSpec {
    pub fn name(&self) -> String {
        let base = match &self.func {
            FeatureFn::SumValues => "sum_values".to_string(),
            FeatureFn::MeanNAbsoluteMax { n } => format!("mean_n_absolute_max__n_{n}"),
            FeatureFn::C3 { lag } => format!("c3__lag_{lag}"),
            FeatureFn::BinnedEntropy { max_bins } => format!("binned_entropy__max_bins_{max_bins}"),
            FeatureFn::IndexMassQuantile { q } => format!("index_mass_quantile__q_{q}"),
            FeatureFn::NumberCwtPeaks { max_width } => {
                format!("number_cwt_peaks__max_width_{max_width}")
            }
            FeatureFn::FftCoefficient { k, attr } => {
                let attr = match attr {
                    FftAttr::Real => "real",
                    FftAttr::Imag => "imag",
                    FftAttr::Abs => "abs",
                    FftAttr::Angle => "angle",
                };
                format!("fft_coefficient__k_{k}__attr_{attr}")
            }
            FeatureFn::Autocorrelation { lag } => format!("autocorrelation__lag_{lag}"),
            FeatureFn::ArCoefficient { k, order } => format!("ar_coefficient__k_{k}__order_{order}"),
            FeatureFn::FriedrichCoefficient { coeff, m, r } => {
                format!("friedrich_coefficients__coeff_{coeff}__m_{m}__r_{r}")
            }
            FeatureFn::MaxLangevinFixedPoint { m, r } => {
                format!("max_langevin_fixed_point__m_{m}__r_{r}")
            }
            FeatureFn::Mean => "mean".to_string(),
            FeatureFn::Std => "std".to_string(),
            FeatureFn::Min => "min".to_string(),
            FeatureFn::Max => "max".to_string(),
            FeatureFn::Median => "median".to_string(),
            FeatureFn::Variance => "variance".to_string(),
            FeatureFn::AbsEnergy => "abs_energy".to_string(),
            FeatureFn::MeanAbsChange => "mean_abs_change".to_string(),
            FeatureFn::MovingAverageLast { w } => format!("moving_average_last__w_{w}"),
            FeatureFn::SlidingStdMax { w } => format!("sliding_std_max__w_{w}"),
        };
        match self.input {
            SeriesInput::Lengths => base,
            SeriesInput::InterArrivals => format!("{base}__iat"),
        }
    }

    /// Parse a canonical name back into a spec.
    pub fn parse(name: &str) -> Result<FeatureSpec, FeatureError> {
        let (body, input) = match name.strip_suffix("__iat") {
            Some(body) => (body, SeriesInput::InterArrivals),
            None => (name, SeriesInput::Lengths),
        };
        let mut segments = body.split("__");
        let func_name = segments.next().unwrap_or_default();
        let mut params: HashMap<&str, &str> = HashMap::new();
        for segment in segments {
            let (key, value) = segment
                .rsplit_once('_')
                .ok_or_else(|| FeatureError::BadParameter(name.to_string()))?;
            params.insert(key, value);
        }
        let get_usize = |key: &str| -> Result<usize, FeatureError> {
            params
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| FeatureError::BadParameter(name.to_string()))
        };
        let func = match func_name {
            "sum_values" => FeatureFn::SumValues,
            "mean_n_absolute_max" => FeatureFn::MeanNAbsoluteMax { n: get_usize("n")? },
            "c3" => FeatureFn::C3 { lag: get_usize("lag")? },
            "binned_entropy" => FeatureFn::BinnedEntropy {
                max_bins: get_usize("max_bins")?,
            },
            "index_mass_quantile" => {
                let q = params
                    .get("q")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| FeatureError::BadParameter(name.to_string()))?;
                FeatureFn::IndexMassQuantile { q }
            }
            "number_cwt_peaks" => FeatureFn::NumberCwtPeaks {
                max_width: get_usize("max_width")?,
            },
            "fft_coefficient" => {
                let attr = match params.get("attr").copied() {
                    Some("real") => FftAttr::Real,
                    Some("imag") => FftAttr::Imag,
                    Some("abs") => FftAttr::Abs,
                    Some("angle") => FftAttr::Angle,
                    _ => return Err(FeatureError::BadParameter(name.to_string())),
                };
                FeatureFn::FftCoefficient { k: get_usize("k")?, attr }
            }
            "autocorrelation" => FeatureFn::Autocorrelation { lag: get_usize("lag")? },
            "ar_coefficient" => FeatureFn::ArCoefficient {
                k: get_usize("k")?,
                order: get_usize("order")?,
            },
            "friedrich_coefficients" => FeatureFn::FriedrichCoefficient {
                coeff: get_usize("coeff")?,
                m: get_usize("m")?,
                r: get_usize("r")?,
            },
            "max_langevin_fixed_point" => FeatureFn::MaxLangevinFixedPoint {
                m: get_usize("m")?,
                r: get_usize("r")?,
            },
            "mean" => FeatureFn::Mean,
            "std" => FeatureFn::Std,
            "min" => FeatureFn::Min,
            "max" => FeatureFn::Max,
            "median" => FeatureFn::Median,
            "variance" => FeatureFn::Variance,
            "abs_energy" => FeatureFn::AbsEnergy,
            "mean_abs_change" => FeatureFn::MeanAbsChange,
            "moving_average_last" => FeatureFn::MovingAverageLast { w: get_usize("w")? },
            "sliding_std_max" => FeatureFn::SlidingStdMax { w: get_usize("w")? },
            _ => return Err(FeatureError::UnknownName(name.to_string())),
        };
        Ok(FeatureSpec { func, input })
    }

    /// Evaluate the spec on a series; `None` means the feature is undefined
    /// for this input and will be imputed.
    pub fn evaluate(&self, series: &[f64]) -> Option<f64> {
        use functions as f;
        match &self.func {
            FeatureFn::SumValues => {
                if series.is_empty() {
                    None
                } else {
                    Some(f::sum_values(series))
                }
            }
            FeatureFn::MeanNAbsoluteMax { n } => f::mean_n_absolute_max(series, *n),
            FeatureFn::C3 { lag } => f::c3(series, *lag),
            FeatureFn::BinnedEntropy { max_bins } => f::binned_entropy(series, *max_bins),
            FeatureFn::IndexMassQuantile { q } => f::index_mass_quantile(series, *q),
            FeatureFn::NumberCwtPeaks { max_width } => f::number_cwt_peaks(series, *max_width),
            FeatureFn::FftCoefficient { k, attr } => f::fft_coefficient(series, *k, *attr),
            FeatureFn::Autocorrelation { lag } => f::autocorrelation(series, *lag),
            FeatureFn::ArCoefficient { k, order } => f::ar_coefficient(series, *k, *order),
            FeatureFn::FriedrichCoefficient { coeff, m, r } => {
                f::friedrich_coefficients(series, *m, *r).map(|c| c[*coeff])
            }
            FeatureFn::MaxLangevinFixedPoint { m, r } => f::max_langevin_fixed_point(series, *m, *r),
            FeatureFn::Mean => f::basic_stats(series).map(|s| s.mean),
            FeatureFn::Std => f::basic_stats(series).map(|s| s.std),
            FeatureFn::Min => f::basic_stats(series).map(|s| s.min),
            FeatureFn::Max => f::basic_stats(series).map(|s| s.max),
            FeatureFn::Median => f::basic_stats(series).map(|s| s.median),
            FeatureFn::Variance => f::basic_stats(series).map(|s| s.variance),
            FeatureFn::AbsEnergy => f::basic_stats(series).map(|s| s.abs_energy),
            FeatureFn::MeanAbsChange => f::basic_stats(series).and_then(|s| s.mean_abs_change),
            FeatureFn::MovingAverageLast { w } => {
                f::rolling_stats(series, *w).map(|s| s.moving_average_last)
            }
            FeatureFn::SlidingStdMax { w } => {
                f::rolling_stats(series, *w).map(|s| s.sliding_std_max)
            }
        }
    }
}

/// The default catalog: every feature family, each computed on packet lengths
/// and again on inter-arrival times (`__iat`). 51 base features, 102 total.
pub fn default_catalog() -> Vec<FeatureSpec> {
    let mut base = vec![
        FeatureFn::Mean,
        FeatureFn::Std,
        FeatureFn::Min,
        FeatureFn::Max,
        FeatureFn::Median,
        FeatureFn::Variance,
        FeatureFn::AbsEnergy,
        FeatureFn::MeanAbsChange,
        FeatureFn::MovingAverageLast { w: 3 },
        FeatureFn::SlidingStdMax { w: 3 },
        FeatureFn::SumValues,
        FeatureFn::MeanNAbsoluteMax { n: 7 },
        FeatureFn::BinnedEntropy { max_bins: 10 },
        FeatureFn::NumberCwtPeaks { max_width: 5 },
    ];
    for lag in 1..=3 {
        base.push(FeatureFn::C3 { lag });
    }
    for q in [0.1, 0.5, 0.9] {
        base.push(FeatureFn::IndexMassQuantile { q });
    }
    for k in 0..=4 {
        for attr in [FftAttr::Real, FftAttr::Imag, FftAttr::Abs, FftAttr::Angle] {
            base.push(FeatureFn::FftCoefficient { k, attr });
        }
    }
    for lag in 1..=3 {
        base.push(FeatureFn::Autocorrelation { lag });
    }
    for k in 0..=2 {
        base.push(FeatureFn::ArCoefficient { k, order: 2 });
    }
    for coeff in 0..=3 {
        base.push(FeatureFn::FriedrichCoefficient { coeff, m: 3, r: 30 });
    }
    base.push(FeatureFn::MaxLangevinFixedPoint { m: 3, r: 30 });

    let mut specs = Vec::with_capacity(base.len() * 2);
    for input in [SeriesInput::Lengths, SeriesInput::InterArrivals] {
        for func in &base {
            specs.push(FeatureSpec {
                func: func.clone(),
                input,
            });
        }
    }
    specs
}

/// Load specs from a text file with one canonical name per line.
pub fn read_specs<R: BufRead>(reader: R) -> Result<Vec<FeatureSpec>, FeatureError> {
    let mut specs = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        specs.push(FeatureSpec::parse(trimmed)?);
    }
    Ok(specs)
}

/// Feature values of one window, ordered exactly like the spec list that
/// produced them. All values are finite (undefined features imputed to 0.0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub window_id: String,
    pub label: Option<Label>,
    pub values: Vec<f64>,
}

/// Evaluate every spec on a window; undefined values are imputed to 0.0.
pub fn extract(window: &Window, specs: &[FeatureSpec]) -> FeatureVector {
    let lengths = window.lengths();
    let iats = window.inter_arrivals();
    let values = specs
        .iter()
        .map(|spec| {
            let series: &[f64] = match spec.input {
                SeriesInput::Lengths => &lengths,
                SeriesInput::InterArrivals => &iats,
            };
            match spec.evaluate(series) {
                Some(v) if v.is_finite() => v,
                _ => 0.0,
            }
        })
        .collect();
    FeatureVector {
        window_id: window.id(),
        label: window.label,
        values,
    }
}

/// A dense feature matrix with named columns, ready for selection, training
/// and prediction. Rows align with `window_ids` and `labels`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub window_ids: Vec<String>,
    pub labels: Vec<Option<Label>>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn from_windows(windows: &[Window], specs: &[FeatureSpec]) -> FeatureMatrix {
        let feature_names = specs.iter().map(|s| s.name()).collect();
        let mut window_ids = Vec::with_capacity(windows.len());
        let mut labels = Vec::with_capacity(windows.len());
        let mut rows = Vec::with_capacity(windows.len());
        for window in windows {
            let fv = extract(window, specs);
            window_ids.push(fv.window_id);
            labels.push(fv.label);
            rows.push(fv.values);
        }
        FeatureMatrix {
            feature_names,
            window_ids,
            labels,
            rows,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Column index by feature name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// New matrix restricted to the given feature names, in the given order.
    pub fn select_columns(&self, names: &[String]) -> Result<FeatureMatrix, FeatureError> {
        let indices: Vec<usize> = names
            .iter()
            .map(|n| {
                self.column(n)
                    .ok_or_else(|| FeatureError::UnknownName(n.clone()))
            })
            .collect::<Result<_, _>>()?;
        Ok(FeatureMatrix {
            feature_names: names.to_vec(),
            window_ids: self.window_ids.clone(),
            labels: self.labels.clone(),
            rows: self
                .rows
                .iter()
                .map(|row| indices.iter().map(|&i| row[i]).collect())
                .collect(),
        })
    }

    /// Write as CSV: `window_id`, an optional `label` column, then one column
    /// per feature.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let has_labels = self.labels.iter().any(|l| l.is_some());
        let mut csv = csv::Writer::from_writer(writer);
        let mut header = vec!["window_id".to_string()];
        if has_labels {
            header.push("label".to_string());
        }
        header.extend(self.feature_names.iter().cloned());
        csv.write_record(&header).map_err(csv_io)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut record = vec![self.window_ids[i].clone()];
            if has_labels {
                record.push(
                    self.labels[i]
                        .map(|l| l.as_str().to_string())
                        .unwrap_or_default(),
                );
            }
            record.extend(row.iter().map(|v| format!("{v}")));
            csv.write_record(&record).map_err(csv_io)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<FeatureMatrix, FeatureError> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers().map_err(csv_io)?.clone();
        let mut iter = headers.iter();
        if iter.next() != Some("window_id") {
            return Err(FeatureError::MissingColumn("window_id"));
        }
        let mut names: Vec<String> = iter.map(|s| s.to_string()).collect();
        let has_labels = names.first().map(|n| n == "label").unwrap_or(false);
        if has_labels {
            names.remove(0);
        }
        let mut matrix = FeatureMatrix {
            feature_names: names,
            window_ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
        };
        for (idx, record) in csv.records().enumerate() {
            let record = record.map_err(csv_io)?;
            let bad = |reason: &str| FeatureError::BadRow {
                row: idx + 1,
                reason: reason.to_string(),
            };
            let mut fields = record.iter();
            matrix
                .window_ids
                .push(fields.next().ok_or_else(|| bad("missing window_id"))?.to_string());
            if has_labels {
                let raw = fields.next().ok_or_else(|| bad("missing label"))?;
                matrix.labels.push(if raw.is_empty() {
                    None
                } else {
                    Some(Label::parse(raw).ok_or_else(|| bad("unknown label"))?)
                });
            } else {
                matrix.labels.push(None);
            }
            let row: Vec<f64> = fields
                .map(|f| f.parse::<f64>().map_err(|_| bad("bad value")))
                .collect::<Result<_, _>>()?;
            if row.len() != matrix.feature_names.len() {
                return Err(bad("wrong column count"));
            }
            matrix.rows.push(row);
        }
        Ok(matrix)
    }
}

fn csv_io(err: csv::Error) -> FeatureError {
    FeatureError::Io(std::io::Error::new(std::io::ErrorKind::InvalidData, err))
}
