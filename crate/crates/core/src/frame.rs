//! Survey frame: per-unit records with a possibly missing outcome, and its
//! CSV schema `id, y, r, weight, z_1..z_k, x_1..x_m[, latent_*]`.

use std::io::{Read, Write};

use crate::selection::{Latent, SimulatedDataset};
use crate::table::Table;
use crate::{Error, Result};

const LATENT_PREFIX: &str = "latent_";

#[derive(Clone, Debug, PartialEq)]
pub struct SurveyFrame {
    pub ids: Vec<String>,
    /// Observed outcome; `None` exactly when `r == 0`.
    pub y: Vec<Option<f64>>,
    pub r: Vec<u8>,
    /// Design weights `1 / P(i in sample)`.
    pub weight: Vec<f64>,
    pub z: Table,
    pub x: Table,
    /// Extra columns written as `latent_<name>`.
    pub latents: Vec<Latent>,
}

impl SurveyFrame {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn respondents(&self) -> usize {
        self.r.iter().filter(|&&r| r == 1).count()
    }

    pub fn nonrespondents(&self) -> usize {
        self.len() - self.respondents()
    }

    /// Observed outcomes, in frame order.
    pub fn observed_y(&self) -> Vec<f64> {
        self.y.iter().flatten().copied().collect()
    }

    /// `phi(Y_i) R_i` with zero for nonrespondents.
    pub fn phi_r(&self, phi: impl Fn(f64) -> f64) -> Vec<f64> {
        self.y.iter().map(|y| y.map_or(0.0, &phi)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        if [self.y.len(), self.r.len(), self.weight.len(), self.z.len(), self.x.len()]
            .iter()
            .any(|&l| l != n)
            || self.latents.iter().any(|l| l.values.len() != n)
        {
            return Err(Error::Data("frame columns differ in length".into()));
        }
        for i in 0..n {
            let row = i + 1;
            match (self.r[i], self.y[i]) {
                (1, Some(y)) if y.is_finite() => {}
                (0, None) => {}
                (r, y) => {
                    return Err(Error::Data(format!(
                        "record {row}: r = {r} inconsistent with y = {y:?}"
                    )))
                }
            }
            if !(self.weight[i] > 0.0 && self.weight[i].is_finite()) {
                return Err(Error::Data(format!("record {row}: weight must be positive")));
            }
        }
        Ok(())
    }

    /// Subset of units, in the given order.
    pub fn select(&self, keep: &[usize]) -> SurveyFrame {
        SurveyFrame {
            ids: keep.iter().map(|&i| self.ids[i].clone()).collect(),
            y: keep.iter().map(|&i| self.y[i]).collect(),
            r: keep.iter().map(|&i| self.r[i]).collect(),
            weight: keep.iter().map(|&i| self.weight[i]).collect(),
            z: self.z.select(keep),
            x: self.x.select(keep),
            latents: self
                .latents
                .iter()
                .map(|l| Latent { name: l.name.clone(), values: keep.iter().map(|&i| l.values[i]).collect() })
                .collect(),
        }
    }

    /// Units whose covariate `x_{column+1}` equals `value`: estimation
    /// conditional on one discrete covariate cell.
    pub fn x_cell(&self, column: usize, value: f64) -> Result<SurveyFrame> {
        if column >= self.x.width() {
            return Err(Error::Precondition(format!(
                "x cell column {} out of range (frame has {} covariates)",
                column + 1,
                self.x.width()
            )));
        }
        let keep: Vec<usize> = (0..self.len()).filter(|&i| self.x.row(i)[column] == value).collect();
        if keep.is_empty() {
            return Err(Error::InsufficientData(format!("no units with x_{} = {value}", column + 1)));
        }
        Ok(self.select(&keep))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = ["id", "y", "r", "weight"].iter().map(|s| s.to_string()).collect();
        header.extend((1..=self.z.width()).map(|j| format!("z_{j}")));
        header.extend((1..=self.x.width()).map(|j| format!("x_{j}")));
        header.extend(self.latents.iter().map(|l| format!("{LATENT_PREFIX}{}", l.name)));
        w.write_record(&header).map_err(io_err)?;
        for i in 0..self.len() {
            let mut rec = vec![
                self.ids[i].clone(),
                self.y[i].map_or_else(String::new, |y| y.to_string()),
                self.r[i].to_string(),
                self.weight[i].to_string(),
            ];
            rec.extend(self.z.row(i).iter().map(f64::to_string));
            rec.extend(self.x.row(i).iter().map(f64::to_string));
            rec.extend(self.latents.iter().map(|l| l.values[i].to_string()));
            w.write_record(&rec).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Data(e.to_string()))
    }

    /// Parses the CSV schema; errors name the offending line.
    pub fn read_csv<R: Read>(input: R) -> Result<SurveyFrame> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers().map_err(io_err)?.clone();
        let names: Vec<&str> = header.iter().collect();
        if names.len() < 4 || names[..4] != ["id", "y", "r", "weight"] {
            return Err(Error::Data(
                "line 1: header must start with id,y,r,weight".into(),
            ));
        }
        let mut k = 0;
        let mut m = 0;
        let mut latent_names = Vec::new();
        for (c, name) in names.iter().enumerate().skip(4) {
            let expect_z = format!("z_{}", k + 1);
            let expect_x = format!("x_{}", m + 1);
            if *name == expect_z && m == 0 && latent_names.is_empty() {
                k += 1;
            } else if *name == expect_x && latent_names.is_empty() {
                m += 1;
            } else if let Some(rest) = name.strip_prefix(LATENT_PREFIX) {
                latent_names.push(rest.to_string());
            } else {
                return Err(Error::Data(format!(
                    "line 1: unexpected column `{name}` at position {}",
                    c + 1
                )));
            }
        }
        let mut frame = SurveyFrame {
            ids: Vec::new(),
            y: Vec::new(),
            r: Vec::new(),
            weight: Vec::new(),
            z: Table::new(k),
            x: Table::new(m),
            latents: latent_names
                .into_iter()
                .map(|name| Latent { name, values: Vec::new() })
                .collect(),
        };
        let mut zr = vec![0.0; k];
        let mut xr = vec![0.0; m];
        for (idx, rec) in rdr.records().enumerate() {
            let line = idx + 2;
            let rec = rec.map_err(|e| Error::Data(format!("line {line}: {e}")))?;
            if rec.len() != names.len() {
                return Err(Error::Data(format!(
                    "line {line}: expected {} fields, found {}",
                    names.len(),
                    rec.len()
                )));
            }
            let num = |c: usize| -> Result<f64> {
                rec[c].trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("line {line}: column `{}`: cannot parse `{}`", names[c], &rec[c]))
                })
            };
            let r = match rec[2].trim() {
                "0" => 0u8,
                "1" => 1u8,
                other => {
                    return Err(Error::Data(format!("line {line}: r must be 0 or 1, found `{other}`")))
                }
            };
            let y = if rec[1].trim().is_empty() { None } else { Some(num(1)?) };
            if (r == 1) != y.is_some() {
                return Err(Error::Data(format!(
                    "line {line}: y must be empty exactly when r = 0"
                )));
            }
            let weight = num(3)?;
            if !(weight > 0.0 && weight.is_finite()) {
                return Err(Error::Data(format!("line {line}: weight must be a positive real")));
            }
            for (j, v) in zr.iter_mut().enumerate() {
                *v = num(4 + j)?;
            }
            for (j, v) in xr.iter_mut().enumerate() {
                *v = num(4 + k + j)?;
            }
            for (j, l) in frame.latents.iter_mut().enumerate() {
                l.values.push(num(4 + k + m + j)?);
            }
            frame.ids.push(rec[0].to_string());
            frame.y.push(y);
            frame.r.push(r);
            frame.weight.push(weight);
            frame.z.push_row(&zr);
            frame.x.push_row(&xr);
        }
        Ok(frame)
    }
}

fn io_err(e: csv::Error) -> Error {
    Error::Data(e.to_string())
}

impl SimulatedDataset {
    /// Survey frame with unit weights; `keep_latents` appends the latent
    /// record and the full outcome vector (`latent_y_full`).
    pub fn to_frame(&self, keep_latents: bool) -> SurveyFrame {
        let n = self.len();
        let mut latents = Vec::new();
        if keep_latents {
            latents.push(Latent { name: "y_full".into(), values: self.y.clone() });
            latents.extend(self.latents.iter().cloned());
        }
        SurveyFrame {
            ids: (1..=n).map(|i| i.to_string()).collect(),
            y: self.y.iter().zip(&self.r).map(|(&y, &r)| (r == 1).then_some(y)).collect(),
            r: self.r.clone(),
            weight: vec![1.0; n],
            z: self.z.clone(),
            x: self.x.clone(),
            latents,
        }
    }
}
