//! Receiver layouts, the trace operator, noise and measurement synthesis.

use std::f64::consts::TAU;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::pml::{FactoredSystem, PmlConfig, DEFAULT_L_PML};

pub const DEFAULT_RC: f64 = 0.45;
pub const CENTER: [f64; 2] = [0.5, 0.5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayoutKind {
    FullCircle,
    /// Receivers and incidence directions spread evenly over
    /// `[center_angle - aperture/2, center_angle + aperture/2]`.
    Arc { center_angle: f64, aperture: f64 },
    Custom { receivers: Vec<[f64; 2]>, source_angles: Vec<f64> },
}

impl LayoutKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayoutKind::FullCircle => "full_circle",
            LayoutKind::Arc { .. } => "arc",
            LayoutKind::Custom { .. } => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceiverLayout {
    pub kind: LayoutKind,
    pub r_c: f64,
    pub receivers: Vec<[f64; 2]>,
    /// Propagation direction angles of the incident plane waves.
    pub source_angles: Vec<f64>,
}

fn circle_angles(count: usize) -> Vec<f64> {
    (0..count).map(|i| TAU * i as f64 / count as f64).collect()
}

fn arc_angles(count: usize, center: f64, aperture: f64) -> Vec<f64> {
    if count == 1 {
        return vec![center];
    }
    let start = center - 0.5 * aperture;
    (0..count).map(|i| start + aperture * i as f64 / (count - 1) as f64).collect()
}

pub fn make_layout(kind: LayoutKind, m: usize, n: usize, r_c: f64) -> Result<ReceiverLayout> {
    if m == 0 || n == 0 {
        return Err(Error::Layout(format!("need at least one source and receiver, got M={m}, N={n}")));
    }
    if !(r_c.is_finite() && r_c > 0.0 && r_c < 0.5) {
        return Err(Error::Layout(format!("receiver radius {r_c} must lie in (0, 0.5)")));
    }
    let on_circle = |angles: Vec<f64>| -> Vec<[f64; 2]> {
        angles.into_iter().map(|a| [CENTER[0] + r_c * a.cos(), CENTER[1] + r_c * a.sin()]).collect()
    };
    let (receivers, source_angles) = match &kind {
        LayoutKind::FullCircle => (on_circle(circle_angles(n)), circle_angles(m)),
        LayoutKind::Arc { center_angle, aperture } => {
            if !(aperture.is_finite() && *aperture > 0.0 && center_angle.is_finite()) {
                return Err(Error::Layout(format!("invalid arc aperture {aperture}")));
            }
            if *aperture >= TAU - 1e-12 {
                return make_layout(LayoutKind::FullCircle, m, n, r_c)
                    .map(|l| ReceiverLayout { kind: kind.clone(), ..l });
            }
            (
                on_circle(arc_angles(n, *center_angle, *aperture)),
                arc_angles(m, *center_angle, *aperture),
            )
        }
        LayoutKind::Custom { receivers, source_angles } => {
            if receivers.len() != n || source_angles.len() != m {
                return Err(Error::Layout(format!(
                    "custom layout has {} receivers and {} sources, expected N={n}, M={m}",
                    receivers.len(),
                    source_angles.len()
                )));
            }
            if let Some(p) = receivers.iter().find(|p| !p.iter().all(|c| *c > 0.0 && *c < 1.0)) {
                return Err(Error::Layout(format!("receiver {p:?} lies outside the open unit square")));
            }
            (receivers.clone(), source_angles.clone())
        }
    };
    Ok(ReceiverLayout { kind, r_c, receivers, source_angles })
}

impl ReceiverLayout {
    pub fn full_circle(m: usize, n: usize) -> Result<Self> {
        make_layout(LayoutKind::FullCircle, m, n, DEFAULT_RC)
    }

    pub fn m(&self) -> usize {
        self.source_angles.len()
    }

    pub fn n(&self) -> usize {
        self.receivers.len()
    }

    pub fn incident(&self, j: usize, grid: Grid, k: f64) -> ComplexField {
        ComplexField::plane_wave(grid, k, self.source_angles[j])
    }

    pub fn incident_fields(&self, grid: Grid, k: f64) -> Vec<ComplexField> {
        (0..self.m()).map(|j| self.incident(j, grid, k)).collect()
    }
}

/// Bilinear sampling at the receivers of a layout on one grid.
#[derive(Debug, Clone)]
pub struct TraceOperator {
    grid: Grid,
    stencils: Vec<[(usize, f64); 4]>,
}

impl TraceOperator {
    pub fn new(layout: &ReceiverLayout, grid: Grid) -> Result<Self> {
        let stencils = layout
            .receivers
            .iter()
            .map(|p| grid.bilinear_stencil(p[0], p[1]))
            .collect::<Result<_>>()?;
        Ok(Self { grid, stencils })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn apply(&self, u: &ComplexField) -> Result<Vec<Complex64>> {
        u.ensure_grid(&self.grid)?;
        Ok(self.apply_slice(u.values()))
    }

    pub(crate) fn apply_slice(&self, u: &[Complex64]) -> Vec<Complex64> {
        self.stencils.iter().map(|s| s.iter().map(|&(idx, w)| u[idx] * w).sum()).collect()
    }

    /// Exact transpose of [`TraceOperator::apply`].
    pub fn adjoint(&self, v: &[Complex64]) -> Result<ComplexField> {
        if v.len() != self.stencils.len() {
            return Err(Error::Layout(format!(
                "expected {} receiver values, got {}",
                self.stencils.len(),
                v.len()
            )));
        }
        let mut out = vec![Complex64::default(); self.grid.len()];
        for (s, &vi) in self.stencils.iter().zip(v) {
            for &(idx, w) in s {
                out[idx] += vi * w;
            }
        }
        ComplexField::new(self.grid, out)
    }
}

pub fn trace(u: &ComplexField, layout: &ReceiverLayout) -> Result<Vec<Complex64>> {
    TraceOperator::new(layout, *u.grid())?.apply(u)
}

pub fn trace_adjoint(v: &[Complex64], layout: &ReceiverLayout, grid: Grid) -> Result<ComplexField> {
    TraceOperator::new(layout, grid)?.adjoint(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    /// `M x N`, row `j` holds the traces of source `j`.
    pub data: Vec<Complex64>,
    pub k: f64,
    pub layout: ReceiverLayout,
    /// `f64::INFINITY` for noiseless data.
    pub snr_db: f64,
    pub seed: Option<u64>,
}

impl MeasurementSet {
    pub fn new(data: Vec<Complex64>, k: f64, layout: ReceiverLayout) -> Result<Self> {
        if data.len() != layout.m() * layout.n() {
            return Err(Error::Layout(format!(
                "data has {} entries, layout expects {}x{}",
                data.len(),
                layout.m(),
                layout.n()
            )));
        }
        if data.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Degenerate("measurement data contain non-finite entries".into()));
        }
        Ok(Self { data, k, layout, snr_db: f64::INFINITY, seed: None })
    }

    pub fn m(&self) -> usize {
        self.layout.m()
    }

    pub fn n(&self) -> usize {
        self.layout.n()
    }

    pub fn source(&self, j: usize) -> &[Complex64] {
        let n = self.n();
        &self.data[j * n..(j + 1) * n]
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.data)
    }
}

fn frobenius(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `10 log10(|clean|^2 / |noisy - clean|^2)` in the Frobenius norm.
pub fn achieved_snr_db(clean: &[Complex64], noisy: &[Complex64]) -> f64 {
    let noise: Vec<Complex64> = noisy.iter().zip(clean).map(|(a, b)| a - b).collect();
    20.0 * (frobenius(clean) / frobenius(&noise)).log10()
}

/// Adds circular complex Gaussian noise rescaled to exactly `snr_db`.
pub fn add_noise(m: &MeasurementSet, snr_db: f64, seed: u64) -> Result<MeasurementSet> {
    if snr_db.is_nan() || snr_db == f64::NEG_INFINITY {
        return Err(Error::Config(format!("invalid SNR {snr_db} dB")));
    }
    let mut out = m.clone();
    out.seed = Some(seed);
    if snr_db == f64::INFINITY {
        return Ok(out);
    }
    let signal = m.frobenius();
    if signal == 0.0 {
        return Err(Error::Degenerate("cannot add relative noise to all-zero data".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: Vec<Complex64> = (0..m.data.len())
        .map(|_| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
        .collect();
    let scale = signal * 10f64.powf(-snr_db / 20.0) / frobenius(&noise);
    for (d, e) in out.data.iter_mut().zip(&noise) {
        *d += e * scale;
    }
    out.snr_db = snr_db;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub k: f64,
    pub fine_n: usize,
    pub coarse_n: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub l_pml: f64,
}

impl SynthesisConfig {
    pub fn new(k: f64, fine_n: usize, coarse_n: usize, snr_db: f64, seed: u64) -> Self {
        Self { k, fine_n, coarse_n, snr_db, seed, l_pml: DEFAULT_L_PML }
    }

    fn validate(&self) -> Result<()> {
        if self.fine_n < self.coarse_n || self.coarse_n < 3 {
            return Err(Error::Config(format!(
                "fine mesh ({}) must be at least as fine as the coarse mesh ({})",
                self.fine_n, self.coarse_n
            )));
        }
        if !(self.fine_n - 1).is_multiple_of(self.coarse_n - 1) {
            return Err(Error::Config(format!(
                "fine mesh {} is not a refinement of coarse mesh {}",
                self.fine_n, self.coarse_n
            )));
        }
        Ok(())
    }
}

/// Simulates the measurements of `q_true` on the fine mesh. A contrast given
/// on a coarser grid is interpolated bilinearly first.
pub fn synthesize(
    q_true: &RealField,
    layout: &ReceiverLayout,
    cfg: &SynthesisConfig,
) -> Result<MeasurementSet> {
    cfg.validate()?;
    let fine_grid = Grid::unit(cfg.fine_n)?;
    let q_fine = if q_true.grid().same_as(&fine_grid) {
        q_true.clone()
    } else {
        q_true.prolongate(cfg.fine_n)?
    };
    let pml = PmlConfig::new(cfg.k, cfg.fine_n, cfg.l_pml)?;
    let trace_op = TraceOperator::new(layout, fine_grid)?;
    let clean = if q_fine.is_zero() {
        vec![Complex64::default(); layout.m() * layout.n()]
    } else {
        let solver = FactoredSystem::new(&q_fine, pml)?;
        let rows = (0..layout.m())
            .into_par_iter()
            .map(|j| {
                let f = layout.incident(j, fine_grid, cfg.k).zip_with(&q_fine, |u, q| u * q)?;
                trace_op.apply(&solver.solve_source(&f)?)
            })
            .collect::<Result<Vec<_>>>()?;
        rows.concat()
    };
    let m = MeasurementSet::new(clean, cfg.k, layout.clone())?;
    if cfg.snr_db == f64::INFINITY {
        let mut m = m;
        m.seed = Some(cfg.seed);
        return Ok(m);
    }
    add_noise(&m, cfg.snr_db, cfg.seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementHeader {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub k: f64,
    /// `None` for noiseless data.
    pub snr_db: Option<f64>,
    pub r_c: f64,
    pub layout_kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aperture: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receivers: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_angles: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl MeasurementHeader {
    fn from_set(m: &MeasurementSet) -> Self {
        let mut h = MeasurementHeader {
            m: m.m(),
            n: m.n(),
            k: m.k,
            snr_db: m.snr_db.is_finite().then_some(m.snr_db),
            r_c: m.layout.r_c,
            layout_kind: m.layout.kind.name().to_string(),
            center_angle: None,
            aperture: None,
            receivers: None,
            source_angles: None,
            seed: m.seed,
        };
        match &m.layout.kind {
            LayoutKind::FullCircle => {}
            LayoutKind::Arc { center_angle, aperture } => {
                h.center_angle = Some(*center_angle);
                h.aperture = Some(*aperture);
            }
            LayoutKind::Custom { receivers, source_angles } => {
                h.receivers = Some(receivers.clone());
                h.source_angles = Some(source_angles.clone());
            }
        }
        h
    }

    fn layout(&self) -> Result<ReceiverLayout> {
        let missing = |key: &str| Error::Format(format!("{} layout needs '{key}'", self.layout_kind));
        let kind = match self.layout_kind.as_str() {
            "full_circle" => LayoutKind::FullCircle,
            "arc" => LayoutKind::Arc {
                center_angle: self.center_angle.ok_or_else(|| missing("center_angle"))?,
                aperture: self.aperture.ok_or_else(|| missing("aperture"))?,
            },
            "custom" => LayoutKind::Custom {
                receivers: self.receivers.clone().ok_or_else(|| missing("receivers"))?,
                source_angles: self.source_angles.clone().ok_or_else(|| missing("source_angles"))?,
            },
            other => return Err(Error::Format(format!("unknown layout kind {other:?}"))),
        };
        make_layout(kind, self.m, self.n, self.r_c)
    }
}

pub fn write_msr(w: &mut impl Write, m: &MeasurementSet) -> Result<()> {
    let line = serde_json::to_string(&MeasurementHeader::from_set(m))
        .map_err(|e| Error::Format(e.to_string()))?;
    w.write_all(line.as_bytes())?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(16 * m.data.len());
    for v in &m.data {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_msr(r: impl Read) -> Result<MeasurementSet> {
    let mut reader = BufReader::new(r);
    let mut line = Vec::new();
    reader.read_until(b'\n', &mut line)?;
    if line.pop() != Some(b'\n') {
        return Err(Error::Format("header line is not terminated".into()));
    }
    let header: MeasurementHeader =
        serde_json::from_slice(&line).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    let layout = header.layout()?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let count = header.m * header.n;
    if payload.len() != 16 * count {
        return Err(Error::Format(format!(
            "expected {} payload bytes, found {}",
            16 * count,
            payload.len()
        )));
    }
    let le = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
    let data = payload.chunks_exact(16).map(|c| Complex64::new(le(&c[..8]), le(&c[8..]))).collect();
    let mut set = MeasurementSet::new(data, header.k, layout)?;
    set.snr_db = header.snr_db.unwrap_or(f64::INFINITY);
    set.seed = header.seed;
    Ok(set)
}

pub fn save_msr(path: impl AsRef<Path>, m: &MeasurementSet) -> Result<()> {
    let mut buf = Vec::new();
    write_msr(&mut buf, m)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_msr(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    read_msr(std::fs::File::open(path)?)
}
