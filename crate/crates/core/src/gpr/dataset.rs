use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};

use crate::dynamics::NominalModel;
use crate::error::{check_dim, Error, Result};
use crate::scalar::Real;

/// GP input location: joint positions, velocities and accelerations,
/// concatenated into one `3N` vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GpInput<T: Real> {
    pub q: DVector<T>,
    pub dq: DVector<T>,
    pub ddq: DVector<T>,
}

impl<T: Real> GpInput<T> {
    pub fn new(q: DVector<T>, dq: DVector<T>, ddq: DVector<T>) -> Result<Self> {
        check_dim("GP input velocity", q.len(), dq.len())?;
        check_dim("GP input acceleration", q.len(), ddq.len())?;
        let x = Self { q, dq, ddq };
        if !x.to_vec().iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("GP input must be finite".into()));
        }
        Ok(x)
    }

    pub fn n_joints(&self) -> usize {
        self.q.len()
    }

    pub fn dim(&self) -> usize {
        3 * self.q.len()
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.q
            .iter()
            .chain(self.dq.iter())
            .chain(self.ddq.iter())
            .copied()
            .collect()
    }

    pub fn from_slice(x: &[T]) -> Result<Self> {
        if x.len() % 3 != 0 || x.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "GP input length {} is not a positive multiple of 3",
                x.len()
            )));
        }
        let n = x.len() / 3;
        Self::new(
            DVector::from_column_slice(&x[..n]),
            DVector::from_column_slice(&x[n..2 * n]),
            DVector::from_column_slice(&x[2 * n..]),
        )
    }
}

/// Mismatch torque `e = τ − M̂(q) q̈ − n̂(q, q̇)` between a measured torque
/// and the nominal model's prediction.
pub fn compute_mismatch_target<T: Real>(
    nominal: &NominalModel<T>,
    input: &GpInput<T>,
    tau: &DVector<T>,
) -> Result<DVector<T>> {
    check_dim("torque", input.n_joints(), tau.len())?;
    let predicted = nominal.inertia(&input.q)? * &input.ddq + nominal.bias(&input.q, &input.dq)?;
    Ok(tau - predicted)
}

/// Training pairs (configuration → mismatch torque).
///
/// Inputs are stored row-wise (`n × 3N`), targets row-wise (`n × N`).
#[derive(Debug, Clone, PartialEq)]
pub struct GpDataset<T: Real> {
    inputs: DMatrix<T>,
    targets: DMatrix<T>,
    noise_std: T,
}

impl<T: Real> GpDataset<T> {
    pub fn new(inputs: DMatrix<T>, targets: DMatrix<T>, noise_std: T) -> Result<Self> {
        check_dim("dataset targets rows", inputs.nrows(), targets.nrows())?;
        check_dim("dataset input width", 3 * targets.ncols(), inputs.ncols())?;
        if targets.ncols() == 0 {
            return Err(Error::InvalidParameter("dataset needs at least one output".into()));
        }
        if !(noise_std >= T::zero()) || !noise_std.is_finite() {
            return Err(Error::InvalidParameter("noise_std must be non-negative".into()));
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("dataset entries must be finite".into()));
        }
        Ok(Self {
            inputs,
            targets,
            noise_std,
        })
    }

    pub fn from_samples(samples: &[(GpInput<T>, DVector<T>)], noise_std: T) -> Result<Self> {
        let first = samples.first().ok_or(Error::EmptyDataset)?;
        let n_out = first.1.len();
        let mut inputs = DMatrix::zeros(samples.len(), 3 * n_out);
        let mut targets = DMatrix::zeros(samples.len(), n_out);
        for (r, (x, y)) in samples.iter().enumerate() {
            check_dim("sample input width", 3 * n_out, x.dim())?;
            check_dim("sample target width", n_out, y.len())?;
            for (c, v) in x.to_vec().into_iter().enumerate() {
                inputs[(r, c)] = v;
            }
            targets.row_mut(r).copy_from(&y.transpose());
        }
        Self::new(inputs, targets, noise_std)
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_outputs(&self) -> usize {
        self.targets.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<T> {
        &self.targets
    }

    pub fn noise_std(&self) -> T {
        self.noise_std
    }

    pub fn input(&self, i: usize) -> GpInput<T> {
        let row: Vec<T> = self.inputs.row(i).iter().copied().collect();
        GpInput::from_slice(&row).expect("stored inputs are valid")
    }

    pub fn target_column(&self, output: usize) -> DVector<T> {
        self.targets.column(output).into_owned()
    }

    /// Copy with one more sample appended.
    pub fn with_sample(&self, x: &GpInput<T>, y: &DVector<T>) -> Result<Self> {
        check_dim("sample input width", self.input_dim(), x.dim())?;
        check_dim("sample target width", self.n_outputs(), y.len())?;
        let n = self.len();
        let mut inputs = self.inputs.clone().insert_row(n, T::zero());
        let mut targets = self.targets.clone().insert_row(n, T::zero());
        for (c, v) in x.to_vec().into_iter().enumerate() {
            inputs[(n, c)] = v;
        }
        targets.row_mut(n).copy_from(&y.transpose());
        Self::new(inputs, targets, self.noise_std)
    }

    pub fn column_names(n_joints: usize) -> Vec<String> {
        let mut names = Vec::with_capacity(4 * n_joints);
        for prefix in ["q", "dq", "ddq", "e"] {
            names.extend((1..=n_joints).map(|j| format!("{prefix}{j}")));
        }
        names
    }

    /// One row per sample: `3N` input columns then `N` target columns.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(Self::column_names(self.n_outputs()))?;
        for r in 0..self.len() {
            let row = self
                .inputs
                .row(r)
                .iter()
                .chain(self.targets.row(r).iter())
                .map(|v| v.to_string())
                .collect::<Vec<_>>();
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, noise_std: T) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let width = rdr.headers()?.len();
        if width == 0 || width % 4 != 0 {
            return Err(Error::Csv(format!("expected 4N columns, found {width}")));
        }
        let n = width / 4;
        let mut values = Vec::new();
        let mut rows = 0;
        for rec in rdr.records() {
            let rec = rec?;
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Csv(format!("bad number {field:?}")))?;
                values.push(T::from_f64(v).ok_or_else(|| Error::Csv("unrepresentable value".into()))?);
            }
            rows += 1;
        }
        if rows == 0 {
            return Err(Error::EmptyDataset);
        }
        let all = DMatrix::from_row_slice(rows, width, &values);
        Self::new(
            all.columns(0, 3 * n).into_owned(),
            all.columns(3 * n, n).into_owned(),
            noise_std,
        )
    }
}
