//! File formats: trajectory/design/actuation CSV exports, the optimizer
//! snapshot, fixed-layout binary particle dumps, the per-iteration log, and
//! Fourier analysis of actuation signals. Layouts are documented in
//! `docs/file_formats.md`.

use crate::error::{MarrowError, SimError};
use crate::math::{wrap_angle, Vec3};
use crate::optimizer::{IterationRecord, OptimizerSnapshot};
use crate::stepper::Trajectory;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

// Floats are written with Rust's shortest-roundtrip formatting, so re-reading
// a CSV reproduces the exact f64 bit patterns.

pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<(), MarrowError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("t_s");
    for (i, _) in traj.probe_ids.iter().enumerate() {
        for axis in ["x", "y", "z"] {
            header.push_str(&format!(",probe{i}_{axis}_m"));
        }
    }
    header.push_str(",cg_x_m,cg_y_m,cg_z_m");
    for a in 0..traj.voltages.len() {
        header.push_str(&format!(",V_in_{a}"));
    }
    writeln!(out, "{header}")?;
    for (s, &step) in traj.sample_steps.iter().enumerate() {
        let mut row = format!("{}", step as f64 * traj.dt);
        for series in &traj.probes {
            let p = series[s];
            row.push_str(&format!(",{},{},{}", p.x, p.y, p.z));
        }
        let cg = traj.cg_samples[s];
        row.push_str(&format!(",{},{},{}", cg.x, cg.y, cg.z));
        for series in &traj.voltages {
            row.push_str(&format!(",{}", series[s]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

/// Design export: particle rows then bar rows, one file.
pub fn write_design_csv(
    path: impl AsRef<Path>,
    rest_positions: &[Vec3],
    phi: &[f64],
    phi_hat: &[f64],
    bar_endpoints: &[(usize, usize)],
    gamma: &[f64],
) -> Result<(), MarrowError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "kind,id,x_m,y_m,z_m,phi,phi_hat,node_a,node_b,gamma")?;
    for i in 0..rest_positions.len() {
        let p = rest_positions[i];
        writeln!(
            out,
            "particle,{i},{},{},{},{},{},,,",
            p.x, p.y, p.z, phi[i], phi_hat[i]
        )?;
    }
    for (g, &(a, b)) in bar_endpoints.iter().enumerate() {
        writeln!(out, "bar,{g},,,,,,{a},{b},{}", gamma[g])?;
    }
    Ok(())
}

/// Re-read the raw design variables from a design CSV.
pub fn read_design_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>), MarrowError> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut phi = Vec::new();
    let mut gamma = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse = |s: &str| -> Result<f64, MarrowError> {
            s.parse::<f64>()
                .map_err(|e| MarrowError::Other(format!("design csv line {lineno}: {e}")))
        };
        match fields[0] {
            "particle" => phi.push(parse(fields[5])?),
            "bar" => gamma.push(parse(fields[9])?),
            other => {
                return Err(MarrowError::Other(format!(
                    "design csv line {lineno}: unknown kind `{other}`"
                )))
            }
        }
    }
    Ok((phi, gamma))
}

pub fn write_actuation_csv(
    path: impl AsRef<Path>,
    times: &[f64],
    series: &[Vec<f64>],
) -> Result<(), MarrowError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let mut header = String::from("t_s");
    for a in 0..series.len() {
        header.push_str(&format!(",V_in_{a}"));
    }
    writeln!(out, "{header}")?;
    for (i, t) in times.iter().enumerate() {
        let mut row = format!("{t}");
        for s in series {
            row.push_str(&format!(",{}", s[i]));
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn read_actuation_csv(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<Vec<f64>>), MarrowError> {
    let file = BufReader::new(std::fs::File::open(path)?);
    let mut times = Vec::new();
    let mut series: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if lineno == 0 {
            let cols = line.split(',').count();
            series = vec![Vec::new(); cols - 1];
            continue;
        }
        let mut fields = line.split(',');
        let t = fields
            .next()
            .unwrap()
            .parse::<f64>()
            .map_err(|e| MarrowError::Other(format!("actuation csv line {lineno}: {e}")))?;
        times.push(t);
        for s in series.iter_mut() {
            let v = fields
                .next()
                .ok_or_else(|| MarrowError::Other(format!("line {lineno}: short row")))?
                .parse::<f64>()
                .map_err(|e| MarrowError::Other(format!("line {lineno}: {e}")))?;
            s.push(v);
        }
    }
    Ok((times, series))
}

// ---------------------------------------------------------------------------
// Optimizer snapshot (JSON) and iteration log (CSV)
// ---------------------------------------------------------------------------

pub fn write_snapshot(
    path: impl AsRef<Path>,
    snapshot: &OptimizerSnapshot,
) -> Result<(), MarrowError> {
    let file = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(file, snapshot).map_err(|e| MarrowError::Other(e.to_string()))?;
    Ok(())
}

pub fn read_snapshot(path: impl AsRef<Path>) -> Result<OptimizerSnapshot, MarrowError> {
    let file = BufReader::new(std::fs::File::open(path)?);
    serde_json::from_reader(file).map_err(|e| MarrowError::Other(e.to_string()))
}

pub struct IterationLog {
    out: BufWriter<std::fs::File>,
}

impl IterationLog {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, MarrowError> {
        let mut out = BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "iteration,l_total,l_x_m,d_soft_m,d_bone_m,c_soft,c_bone,c_act,c_nbone,\
             lambda_soft,lambda_bone,lambda_act,lambda_nbone,\
             sigma_soft,sigma_bone,sigma_act,sigma_nbone,c_soft_active,grad_max,rolled_back,wall_s"
        )?;
        Ok(IterationLog { out })
    }

    pub fn append(&mut self, r: &IterationRecord) -> Result<(), MarrowError> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.l_total,
            r.l_x,
            r.d_soft,
            r.d_bone,
            r.constraints[0],
            r.constraints[1],
            r.constraints[2],
            r.constraints[3],
            r.lambda[0],
            r.lambda[1],
            r.lambda[2],
            r.lambda[3],
            r.sigma[0],
            r.sigma[1],
            r.sigma[2],
            r.sigma[3],
            r.c_soft_active,
            r.grad_max,
            r.rolled_back,
            r.wall_s
        )?;
        self.out.flush()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Binary particle snapshots
// ---------------------------------------------------------------------------

const SNAPSHOT_MAGIC: &[u8; 8] = b"MRSNAP01";

/// Fixed-layout little-endian records: u64 id, f64 x, y, z, phi_hat.
pub fn write_particle_snapshot(
    path: impl AsRef<Path>,
    positions: &[Vec3],
    phi_hat: &[f64],
) -> Result<(), MarrowError> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(SNAPSHOT_MAGIC)?;
    out.write_all(&(positions.len() as u64).to_le_bytes())?;
    for (i, p) in positions.iter().enumerate() {
        out.write_all(&(i as u64).to_le_bytes())?;
        for v in [p.x, p.y, p.z, phi_hat[i]] {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_particle_snapshot(path: impl AsRef<Path>) -> Result<(Vec<Vec3>, Vec<f64>), MarrowError> {
    let mut file = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(MarrowError::Other("bad snapshot magic".into()));
    }
    let mut buf8 = [0u8; 8];
    file.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;
    let mut positions = Vec::with_capacity(n);
    let mut phi_hat = Vec::with_capacity(n);
    for _ in 0..n {
        file.read_exact(&mut buf8)?; // id, implied by record order
        let mut vals = [0.0f64; 4];
        for v in &mut vals {
            file.read_exact(&mut buf8)?;
            *v = f64::from_le_bytes(buf8);
        }
        positions.push(Vec3::new(vals[0], vals[1], vals[2]));
        phi_hat.push(vals[3]);
    }
    Ok((positions, phi_hat))
}

// ---------------------------------------------------------------------------
// Actuation spectrum analysis
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    /// Dominant nonzero-bin frequency per actuator.
    pub dominant_hz: Vec<f64>,
    /// Bin shared by the first two actuators (max combined magnitude).
    pub shared_dominant_hz: f64,
    /// Phase of series 0 minus phase of series 1 at the shared bin, wrapped
    /// into (-pi, pi]; positive means series 1 lags series 0.
    pub phase_delay_rad: Option<f64>,
}

/// DFT of one cycle of each actuation series. The series must cover an
/// integer number of cycles at uniform sampling; analysis uses the first.
pub fn analyze_spectrum(
    series: &[Vec<f64>],
    sample_dt: f64,
    cycle_duration: f64,
) -> Result<SpectrumReport, SimError> {
    if series.is_empty() {
        return Err(SimError::Other("no actuation series".into()));
    }
    let n = (cycle_duration / sample_dt).round() as usize;
    if n < 2 {
        return Err(SimError::Other("cycle too short for the sample rate".into()));
    }
    for (i, s) in series.iter().enumerate() {
        if s.len() < n {
            return Err(SimError::Other(format!(
                "series {i} has {} samples, one cycle needs {n}",
                s.len()
            )));
        }
        if s.len() != series[0].len() {
            return Err(SimError::Other("mismatched series lengths".into()));
        }
    }

    // complex DFT coefficients for bins 1..n/2 of one cycle
    let dft = |x: &[f64]| -> Vec<(f64, f64)> {
        let mut coef = Vec::with_capacity(n / 2);
        for k in 1..=n / 2 {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().take(n).enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
                re += v * ang.cos();
                im += v * ang.sin();
            }
            coef.push((re, im));
        }
        coef
    };
    let mags =
        |coef: &[(f64, f64)]| -> Vec<f64> { coef.iter().map(|(re, im)| re.hypot(*im)).collect() };

    let coefs: Vec<Vec<(f64, f64)>> = series.iter().map(|s| dft(s)).collect();
    let mut dominant_hz = Vec::new();
    for (i, coef) in coefs.iter().enumerate() {
        let m = mags(coef);
        let total: f64 = series[i].iter().take(n).map(|v| v.abs()).sum();
        let (best, &best_mag) = m
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if best_mag <= 1e-9 * total.max(1e-300) {
            return Err(SimError::Other(format!(
                "series {i} has no nonzero-bin dominant frequency (constant signal)"
            )));
        }
        dominant_hz.push((best + 1) as f64 / cycle_duration);
    }

    let (shared_dominant_hz, phase_delay_rad) = if series.len() >= 2 {
        let m0 = mags(&coefs[0]);
        let m1 = mags(&coefs[1]);
        let shared = (0..m0.len())
            .max_by(|&a, &b| (m0[a] + m1[a]).partial_cmp(&(m0[b] + m1[b])).unwrap())
            .unwrap();
        let (re0, im0) = coefs[0][shared];
        let (re1, im1) = coefs[1][shared];
        let delay = wrap_angle(im0.atan2(re0) - im1.atan2(re1));
        ((shared + 1) as f64 / cycle_duration, Some(delay))
    } else {
        (dominant_hz[0], None)
    };

    Ok(SpectrumReport {
        dominant_hz,
        shared_dominant_hz,
        phase_delay_rad,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("marrow-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn single_tone_dominant_frequency() {
        // sin(2*pi*10 t) sampled at 500 Hz over 0.5 s
        let dt = 1.0 / 500.0;
        let x: Vec<f64> = (0..250)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 * dt).sin())
            .collect();
        let report = analyze_spectrum(&[x], dt, 0.5).unwrap();
        assert_eq!(report.dominant_hz[0], 10.0);
    }

    #[test]
    fn injected_phase_delay_is_recovered() {
        let dt = 1.0 / 500.0;
        let delay = 1.747;
        let rear: Vec<f64> = (0..250)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 * dt).sin())
            .collect();
        let front: Vec<f64> = (0..250)
            .map(|i| (2.0 * std::f64::consts::PI * 10.0 * i as f64 * dt - delay).sin())
            .collect();
        let report = analyze_spectrum(&[rear, front], dt, 0.5).unwrap();
        assert_eq!(report.shared_dominant_hz, 10.0);
        let got = report.phase_delay_rad.unwrap();
        assert!((got - delay).abs() < 1e-9, "phase delay {got}");
    }

    #[test]
    fn constant_offset_does_not_change_the_analysis() {
        let dt = 1.0 / 500.0;
        let mk = |off: f64, ph: f64| -> Vec<f64> {
            (0..250)
                .map(|i| off + (2.0 * std::f64::consts::PI * 10.0 * i as f64 * dt - ph).sin())
                .collect()
        };
        let a = analyze_spectrum(&[mk(0.0, 0.0), mk(0.0, 0.9)], dt, 0.5).unwrap();
        let b = analyze_spectrum(&[mk(3.0, 0.0), mk(5.0, 0.9)], dt, 0.5).unwrap();
        assert_eq!(a.shared_dominant_hz, b.shared_dominant_hz);
        let (da, db) = (a.phase_delay_rad.unwrap(), b.phase_delay_rad.unwrap());
        assert!((da - db).abs() < 1e-9);
    }

    #[test]
    fn constant_signal_is_degenerate() {
        let x = vec![0.7; 250];
        let err = analyze_spectrum(&[x], 1.0 / 500.0, 0.5).unwrap_err();
        assert!(err.to_string().contains("no nonzero-bin"));
    }

    #[test]
    fn design_csv_round_trips_exactly() {
        let dir = tmpdir();
        let path = dir.join("design.csv");
        let pos = vec![Vec3::new(0.1, 0.2, 0.3), Vec3::new(0.4, 0.5, 0.6)];
        let phi = vec![0.123456789012345678, -0.98765432109876543];
        let phi_hat = vec![0.7, 0.2];
        let bars = vec![(0usize, 1usize)];
        let gamma = vec![1.0 / 3.0];
        write_design_csv(&path, &pos, &phi, &phi_hat, &bars, &gamma).unwrap();
        let (phi2, gamma2) = read_design_csv(&path).unwrap();
        for (a, b) in phi.iter().zip(&phi2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in gamma.iter().zip(&gamma2) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn particle_snapshot_round_trips() {
        let dir = tmpdir();
        let path = dir.join("particles.bin");
        let pos = vec![Vec3::new(1.0, -2.0, 3.5), Vec3::new(0.25, 0.5, 0.75)];
        let ph = vec![0.1, 0.9];
        write_particle_snapshot(&path, &pos, &ph).unwrap();
        let (pos2, ph2) = read_particle_snapshot(&path).unwrap();
        assert_eq!(pos.len(), pos2.len());
        for (a, b) in pos.iter().zip(&pos2) {
            assert_eq!(a, b);
        }
        assert_eq!(ph, ph2);
    }

    #[test]
    fn actuation_csv_round_trips() {
        let dir = tmpdir();
        let path = dir.join("actuation.csv");
        let times: Vec<f64> = (0..10).map(|i| i as f64 * 0.002).collect();
        let series = vec![
            (0..10).map(|i| (i as f64 * 0.3).sin()).collect::<Vec<f64>>(),
            (0..10).map(|i| (i as f64 * 0.7).cos()).collect::<Vec<f64>>(),
        ];
        write_actuation_csv(&path, &times, &series).unwrap();
        let (t2, s2) = read_actuation_csv(&path).unwrap();
        assert_eq!(times, t2);
        assert_eq!(series, s2);
    }
}
