//! JSON formats for instances, solutions and preconditioner matrices.

use std::io::Read;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bases::{
    gaussian_calibrate, Basis, BasisKind, CalibrationConfig, Dictionary, GaussianCalibration,
    GaussianSampling, Preconditioner,
};
use crate::error::{Error, Result};
use crate::numerics::C64;
use crate::prosparse::{Discovery, SolutionSet, SparseSolution};
use crate::sparse::SparseVec;

pub const SCHEMA_VERSION: u32 = 1;

/// Block length used when a local-Fourier dictionary is named without one.
pub const DEFAULT_BLOCK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum DictKind {
    FourierCanonical,
    #[value(name = "fourier-localfourier")]
    #[serde(rename = "fourier-localfourier")]
    FourierLocalFourier,
    DctCanonical,
    GaussianCanonical,
    Custom,
}

impl DictKind {
    pub fn name(self) -> &'static str {
        match self {
            DictKind::FourierCanonical => "fourier-canonical",
            DictKind::FourierLocalFourier => "fourier-localfourier",
            DictKind::DctCanonical => "dct-canonical",
            DictKind::GaussianCanonical => "gaussian-canonical",
            DictKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictParams {
    /// Block length `L` of the local Fourier basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<usize>,
    /// Gaussian sampling constants; calibrated on load when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling: Option<GaussianSampling>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<BasisKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<BasisKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DictSpec {
    pub kind: DictKind,
    #[serde(default)]
    pub params: DictParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A dictionary together with the calibration that produced its Gaussian
/// sampling rule, if one was run.
#[derive(Debug, Clone)]
pub struct BuiltDict {
    pub dict: Dictionary,
    pub spec: DictSpec,
    pub calibration: Option<GaussianCalibration>,
}

/// `K` range calibrated for a Gaussian basis of dimension `n`: `1..=max(1, floor(sqrt(N)/2))`.
pub fn gaussian_k_max(n: usize) -> usize {
    (((n as f64).sqrt() / 2.0).floor() as usize).clamp(1, n.saturating_sub(1).max(1))
}

impl DictSpec {
    pub fn new(kind: DictKind) -> Self {
        Self {
            kind,
            params: DictParams::default(),
            seed: None,
        }
    }

    /// Builds the dictionary, calibrating a Gaussian sampling rule first
    /// when none is recorded.
    pub fn build(&self, n: usize) -> Result<BuiltDict> {
        let mut spec = self.clone();
        let mut calibration = None;
        let dict = match self.kind {
            DictKind::FourierCanonical => Dictionary::fourier_canonical(n)?,
            DictKind::FourierLocalFourier => {
                let block = self.params.block.unwrap_or(DEFAULT_BLOCK);
                spec.params.block = Some(block);
                Dictionary::fourier_local_fourier(n, block)?
            }
            DictKind::DctCanonical => Dictionary::dct_canonical(n)?,
            DictKind::GaussianCanonical => {
                let seed = self.seed.unwrap_or(0);
                spec.seed = Some(seed);
                let sampling = match self.params.sampling {
                    Some(s) => s,
                    None => {
                        let cal = gaussian_calibrate(
                            n,
                            seed,
                            1..=gaussian_k_max(n),
                            0.95,
                            &CalibrationConfig::default(),
                        )?;
                        let s = cal.sampling;
                        calibration = Some(cal);
                        s
                    }
                };
                spec.params.sampling = Some(sampling);
                Dictionary::gaussian_canonical(n, seed, sampling)?
            }
            DictKind::Custom => {
                let (psi, phi) = match (self.params.psi, self.params.phi) {
                    (Some(a), Some(b)) => (a, b),
                    _ => {
                        return Err(Error::Malformed(
                            "a custom dictionary needs params.psi and params.phi".into(),
                        ))
                    }
                };
                let sampling = self.params.sampling;
                Dictionary::new(
                    Basis::from_kind(n, psi, sampling)?,
                    Basis::from_kind(n, phi, sampling)?,
                )?
            }
        };
        Ok(BuiltDict {
            dict,
            spec,
            calibration,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coefficient {
    pub index: usize,
    pub coeff: [f64; 2],
}

fn to_coeffs(v: &SparseVec) -> Vec<Coefficient> {
    v.iter()
        .map(|(index, c)| Coefficient {
            index,
            coeff: [c.re, c.im],
        })
        .collect()
}

fn from_coeffs(c: &[Coefficient], n: usize) -> Result<SparseVec> {
    let mut pairs = Vec::with_capacity(c.len());
    for e in c {
        if e.index >= n {
            return Err(Error::Malformed(format!(
                "coefficient index {} outside 0..{n}",
                e.index
            )));
        }
        pairs.push((e.index, complex(e.coeff)?));
    }
    let v = SparseVec::from_pairs(pairs);
    if v.nnz() != c.len() {
        return Err(Error::Malformed("repeated coefficient index".into()));
    }
    Ok(v)
}

fn complex(p: [f64; 2]) -> Result<C64> {
    if p[0].is_finite() && p[1].is_finite() {
        Ok(C64::new(p[0], p[1]))
    } else {
        Err(Error::Malformed("non-finite number".into()))
    }
}

pub fn samples_to_pairs(y: &[C64]) -> Vec<[f64; 2]> {
    y.iter().map(|c| [c.re, c.im]).collect()
}

/// One representation `y = Psi x_p + Phi x_q`. `fourier` holds the
/// segment-basis coefficients whatever that basis is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionEntry {
    pub kp: usize,
    pub kq: usize,
    pub fourier: Vec<Coefficient>,
    pub local: Vec<Coefficient>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discovered_at: Option<Discovery>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resynthesis_error: Option<f64>,
}

impl SolutionEntry {
    pub fn from_parts(xp: &SparseVec, xq: &SparseVec) -> Self {
        Self {
            kp: xp.nnz(),
            kq: xq.nnz(),
            fourier: to_coeffs(xp),
            local: to_coeffs(xq),
            discovered_at: None,
            resynthesis_error: None,
        }
    }

    pub fn from_solution(s: &SparseSolution) -> Self {
        Self {
            discovered_at: Some(s.discovered_at),
            resynthesis_error: Some(s.resynthesis_error),
            ..Self::from_parts(&s.segment, &s.local)
        }
    }

    /// `(x_p, x_q)`, checked against the recorded counts.
    pub fn parts(&self, n: usize) -> Result<(SparseVec, SparseVec)> {
        let xp = from_coeffs(&self.fourier, n)?;
        let xq = from_coeffs(&self.local, n)?;
        if xp.nnz() != self.kp || xq.nnz() != self.kq {
            return Err(Error::Malformed(
                "kp/kq disagree with the listed coefficients".into(),
            ));
        }
        Ok((xp, xq))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub generator: String,
    pub seed: Option<u64>,
    /// Always `null`, so identical runs give identical bytes.
    pub timestamp: Option<String>,
}

impl Provenance {
    pub fn new(generator: impl Into<String>, seed: Option<u64>) -> Self {
        Self {
            generator: generator.into(),
            seed,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub n: usize,
    pub dict: DictSpec,
    pub samples: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planted: Option<SolutionEntry>,
    /// Further known representations of the same samples.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<SolutionEntry>,
    pub provenance: Provenance,
}

impl InstanceFile {
    pub fn new(dict: DictSpec, y: &[C64], provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n: y.len(),
            dict,
            samples: samples_to_pairs(y),
            planted: None,
            alternatives: Vec::new(),
            provenance,
        }
    }

    /// Checks the schema version, the sample count and finiteness.
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        if self.samples.len() != self.n {
            return Err(Error::Malformed(format!(
                "{} samples for n = {}",
                self.samples.len(),
                self.n
            )));
        }
        if self.n == 0 {
            return Err(Error::Malformed("n = 0".into()));
        }
        self.signal()?;
        for s in self.planted.iter().chain(&self.alternatives) {
            s.parts(self.n)?;
        }
        Ok(())
    }

    pub fn signal(&self) -> Result<Vec<C64>> {
        self.samples.iter().map(|&p| complex(p)).collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)
            .map_err(|e| Error::Malformed(format!("instance file: {e}")))?;
        f.validate()?;
        Ok(f)
    }
}

fn check_version(v: u32) -> Result<()> {
    if v != SCHEMA_VERSION {
        return Err(Error::Malformed(format!(
            "schema_version {v} is not {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub schema_version: u32,
    pub n: usize,
    pub dict: DictSpec,
    /// In canonical order.
    pub solutions: Vec<SolutionEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<GaussianCalibration>,
}

impl SolutionFile {
    pub fn new(
        n: usize,
        dict: DictSpec,
        set: &SolutionSet,
        calibration: Option<GaussianCalibration>,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            n,
            dict,
            solutions: set.iter().map(SolutionEntry::from_solution).collect(),
            calibration,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)
            .map_err(|e| Error::Malformed(format!("solution file: {e}")))?;
        check_version(f.schema_version)?;
        for s in &f.solutions {
            s.parts(f.n)?;
        }
        Ok(f)
    }
}

/// Square complex matrix as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub schema_version: u32,
    pub n: usize,
    pub rows: Vec<Vec<[f64; 2]>>,
}

impl MatrixFile {
    pub fn from_matrix(a: &DMatrix<C64>) -> Self {
        let rows = (0..a.nrows())
            .map(|i| {
                (0..a.ncols())
                    .map(|j| [a[(i, j)].re, a[(i, j)].im])
                    .collect()
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            n: a.nrows(),
            rows,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<C64>> {
        check_version(self.schema_version)?;
        if self.rows.len() != self.n || self.rows.iter().any(|r| r.len() != self.n) {
            return Err(Error::Malformed(format!("matrix is not {0} x {0}", self.n)));
        }
        let mut a = DMatrix::<C64>::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, &p) in row.iter().enumerate() {
                a[(i, j)] = complex(p)?;
            }
        }
        Ok(a)
    }

    pub fn preconditioner(&self) -> Result<Preconditioner> {
        Preconditioner::new(self.to_matrix()?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Malformed(format!("matrix file: {e}")))
    }
}

/// Reads a file, or stdin for `None` and `-`.
pub fn read_input(path: Option<&Path>) -> Result<String> {
    let mut text = String::new();
    match path {
        Some(p) if p.as_os_str() != "-" => {
            text = std::fs::read_to_string(p)?;
        }
        _ => {
            std::io::stdin().read_to_string(&mut text)?;
        }
    }
    Ok(text)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{make_random_planted, Placement};

    #[test]
    fn instance_round_trip_is_exact() {
        let dict = Dictionary::fourier_canonical(32).unwrap();
        let p = make_random_planted(&dict, 2, 3, 7, Placement::Uniform).unwrap();
        let mut f = InstanceFile::new(
            DictSpec::new(DictKind::FourierCanonical),
            &p.y,
            Provenance::new("test", Some(7)),
        );
        f.planted = Some(SolutionEntry::from_parts(&p.segment, &p.local));
        let back = InstanceFile::from_json(&to_json(&f).unwrap()).unwrap();
        assert_eq!(back, f);
        assert_eq!(back.signal().unwrap(), p.y);
        assert_eq!(
            back.planted.unwrap().parts(32).unwrap(),
            (p.segment, p.local)
        );
    }

    #[test]
    fn rejects_bad_files() {
        let f = InstanceFile::new(
            DictSpec::new(DictKind::FourierCanonical),
            &[C64::new(1.0, 0.0); 4],
            Provenance::new("t", None),
        );
        let mut v: serde_json::Value = serde_json::from_str(&to_json(&f).unwrap()).unwrap();
        v["schema_version"] = 2.into();
        assert!(matches!(
            InstanceFile::from_json(&v.to_string()),
            Err(Error::Malformed(_))
        ));
        v["schema_version"] = 1.into();
        v["n"] = 5.into();
        assert!(matches!(
            InstanceFile::from_json(&v.to_string()),
            Err(Error::Malformed(_))
        ));
        assert!(matches!(
            InstanceFile::from_json("{"),
            Err(Error::Malformed(_))
        ));
    }

    #[test]
    fn dict_spec_names() {
        let s = DictSpec {
            kind: DictKind::FourierLocalFourier,
            params: DictParams {
                block: Some(4),
                ..Default::default()
            },
            seed: None,
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"fourier-localfourier","params":{"block":4}}"#);
        assert_eq!(s.build(16).unwrap().dict.phi().local_length(), Some(4));
        let custom: DictSpec = serde_json::from_str(
            r#"{"kind":"custom","params":{"psi":{"kind":"dct"},"phi":{"kind":"canonical"}}}"#,
        )
        .unwrap();
        assert_eq!(custom.build(16).unwrap().dict.psi().tau(), Some(1));
    }
}
