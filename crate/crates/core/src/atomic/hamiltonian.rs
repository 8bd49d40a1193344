use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{ManifoldSpec, ZeemanState};
use crate::error::{Error, Result};

/// Field at which state labels are fixed by energy order.
pub const REFERENCE_FIELD_MT: f64 = 300.0;

const RESIDUAL_TOL: f64 = 1e-9;

fn check_field(b_mt: f64) -> Result<()> {
    if !b_mt.is_finite() || b_mt < 0.0 {
        return Err(Error::domain(format!(
            "magnetic field must be >= 0, got {b_mt} mT"
        )));
    }
    Ok(())
}

fn ladder_up(tj: i32, tm: i32) -> f64 {
    // sqrt(j(j+1) - m(m+1)) with doubled arguments
    let j = tj as f64 / 2.0;
    let m = tm as f64 / 2.0;
    (j * (j + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
}

/// `I.J` in the product basis of `spec`.
fn i_dot_j(spec: &ManifoldSpec, basis: &[(i32, i32)]) -> DMatrix<f64> {
    let n = basis.len();
    let pos: HashMap<(i32, i32), usize> = basis.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let (tj, ti) = (spec.two_j(), spec.two_i());
    let mut m = DMatrix::zeros(n, n);
    for (col, &(mj, mi)) in basis.iter().enumerate() {
        m[(col, col)] = (mj as f64 / 2.0) * (mi as f64 / 2.0);
        // J+ I- |mj, mi>
        if let Some(&row) = pos.get(&(mj + 2, mi - 2)) {
            let v = 0.5 * ladder_up(tj, mj) * ladder_up(ti, -mi);
            m[(row, col)] += v;
        }
        // J- I+ |mj, mi>
        if let Some(&row) = pos.get(&(mj - 2, mi + 2)) {
            let v = 0.5 * ladder_up(tj, -mj) * ladder_up(ti, mi);
            m[(row, col)] += v;
        }
    }
    m
}

/// Hyperfine plus Zeeman Hamiltonian (MHz) in the `|m_j, m_i>` basis of
/// [`ManifoldSpec::basis`].
pub fn build_hamiltonian(spec: &ManifoldSpec, b_mt: f64) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_field(b_mt)?;
    let basis = spec.basis();
    if basis.len() != spec.dimension() {
        return Err(Error::structural("basis size does not match (2J+1)(2I+1)"));
    }
    let ij = i_dot_j(spec, &basis);
    let mut h = &ij * spec.a_hfs_mhz;
    if spec.b_hfs_mhz != 0.0 {
        let (i, j) = (spec.i, spec.j);
        let ii = i * (i + 1.0);
        let jj = j * (j + 1.0);
        let denom = 2.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0);
        let mut q = &ij * &ij * 3.0 + &ij * 1.5;
        for k in 0..q.nrows() {
            q[(k, k)] -= ii * jj;
        }
        h += q * (spec.b_hfs_mhz / denom);
    }
    let mub = spec.bohr_magneton_mhz_per_mt * b_mt;
    for (k, &(mj, mi)) in basis.iter().enumerate() {
        h[(k, k)] += mub * (spec.g_j * mj as f64 / 2.0 + spec.g_i * mi as f64 / 2.0);
    }
    // symmetrise away rounding in the quadrupole product
    let ht = h.transpose();
    Ok((h + ht) * 0.5)
}

/// Analytic zero-field energy (MHz) of hyperfine level `F` (given doubled).
pub fn zero_field_energy(spec: &ManifoldSpec, two_f: i32) -> f64 {
    let (i, j) = (spec.i, spec.j);
    let f = two_f as f64 / 2.0;
    let k = f * (f + 1.0) - i * (i + 1.0) - j * (j + 1.0);
    let mut e = 0.5 * spec.a_hfs_mhz * k;
    if spec.b_hfs_mhz != 0.0 {
        e += spec.b_hfs_mhz * (1.5 * k * (k + 1.0) - 2.0 * i * (i + 1.0) * j * (j + 1.0))
            / (4.0 * i * (2.0 * i - 1.0) * j * (2.0 * j - 1.0));
    }
    e
}

struct RawState {
    two_mf: i32,
    rank: usize,
    energy: f64,
    vector: Vec<f64>,
}

/// Diagonalises each `m_F` block and returns states ordered by
/// (`m_F` descending, energy ascending) with their rank inside the block.
fn block_states(spec: &ManifoldSpec, b_mt: f64) -> Result<(DMatrix<f64>, Vec<RawState>)> {
    let h = build_hamiltonian(spec, b_mt)?;
    let basis = spec.basis();
    let n = basis.len();
    let mut blocks: Vec<(i32, Vec<usize>)> = Vec::new();
    for (k, &(mj, mi)) in basis.iter().enumerate() {
        let mf = mj + mi;
        match blocks.iter_mut().find(|(m, _)| *m == mf) {
            Some((_, v)) => v.push(k),
            None => blocks.push((mf, vec![k])),
        }
    }
    blocks.sort_by_key(|b| std::cmp::Reverse(b.0));

    let mut out = Vec::with_capacity(n);
    for (mf, idx) in blocks {
        let sub = DMatrix::from_fn(idx.len(), idx.len(), |r, c| h[(idx[r], idx[c])]);
        let eig = SymmetricEigen::try_new(sub, 1e-15, 10_000).ok_or_else(|| {
            Error::numerical(
                "eigensolver did not converge",
                format!("{} block 2mF={mf} at {b_mt} mT", spec.label),
            )
        })?;
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        for (rank, &col) in order.iter().enumerate() {
            let mut v = vec![0.0; n];
            for (r, &k) in idx.iter().enumerate() {
                v[k] = eig.eigenvectors[(r, col)];
            }
            let big = v
                .iter()
                .copied()
                .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            if big < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            out.push(RawState {
                two_mf: mf,
                rank,
                energy: eig.eigenvalues[col],
                vector: v,
            });
        }
    }
    Ok((h, out))
}

/// Map from (2 m_F, rank in block) to the 1-based label, fixed by ascending
/// energy at [`REFERENCE_FIELD_MT`].
fn reference_labels(spec: &ManifoldSpec) -> Result<HashMap<(i32, usize), usize>> {
    let (_, mut states) = block_states(spec, REFERENCE_FIELD_MT)?;
    states.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(states
        .iter()
        .enumerate()
        .map(|(k, s)| ((s.two_mf, s.rank), k + 1))
        .collect())
}

fn residual_check(spec: &ManifoldSpec, h: &DMatrix<f64>, s: &RawState, b_mt: f64) -> Result<()> {
    let v = nalgebra::DVector::from_column_slice(&s.vector);
    let r = (h * &v - &v * s.energy).norm();
    let scale = h.norm().max(f64::MIN_POSITIVE);
    if r > RESIDUAL_TOL * scale {
        return Err(Error::numerical(
            "eigenvector residual above tolerance",
            format!(
                "{} state 2mF={} rank {} at {b_mt} mT: |Hv-Ev| = {r:e}, |H| = {scale:e}",
                spec.label, s.two_mf, s.rank
            ),
        ));
    }
    Ok(())
}

fn diagonalize_with_offset(
    spec: &ManifoldSpec,
    b_mt: f64,
    offset: usize,
) -> Result<Vec<ZeemanState>> {
    let labels = reference_labels(spec)?;
    let (h, raw) = block_states(spec, b_mt)?;
    let basis = spec.basis();
    let mut states = Vec::with_capacity(raw.len());
    for s in raw {
        residual_check(spec, &h, &s, b_mt)?;
        let dom = s
            .vector
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        let (mj, mi) = basis[dom];
        states.push(ZeemanState {
            manifold: spec.label.clone(),
            index: offset + labels[&(s.two_mf, s.rank)],
            energy_mhz: s.energy,
            two_mf: s.two_mf,
            composition: s.vector,
            dominant_mj_mi: (mj as f64 / 2.0, mi as f64 / 2.0),
        });
    }
    states.sort_by(|a, b| {
        a.energy_mhz
            .total_cmp(&b.energy_mhz)
            .then(a.index.cmp(&b.index))
    });
    Ok(states)
}

/// All eigenstates of one manifold sorted by energy.
///
/// Labels run from 1 to the manifold dimension in order of increasing energy
/// at 300 mT. Within an `m_F` block the Hamiltonian has no true crossings, so
/// the rank of a state inside its block identifies it at every field and
/// labels follow each level continuously in B.
pub fn diagonalize_manifold(spec: &ManifoldSpec, b_mt: f64) -> Result<Vec<ZeemanState>> {
    diagonalize_with_offset(spec, b_mt, 0)
}

/// The 48 ladder states, labelled 1-8 (ground), 9-24 (intermediate) and
/// 25-48 (doubly excited).
pub fn ladder_states(ladder: &[ManifoldSpec; 3], b_mt: f64) -> Result<[Vec<ZeemanState>; 3]> {
    let g = diagonalize_with_offset(&ladder[0], b_mt, 0)?;
    let off1 = ladder[0].dimension();
    let e = diagonalize_with_offset(&ladder[1], b_mt, off1)?;
    let off2 = off1 + ladder[1].dimension();
    let d = diagonalize_with_offset(&ladder[2], b_mt, off2)?;
    Ok([g, e, d])
}

/// A label whose eigenvector changed abruptly between two grid points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discontinuity {
    pub index: usize,
    pub from_mt: f64,
    pub to_mt: f64,
    pub overlap: f64,
}

/// Energies of every labelled state over a field grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreitRabiTable {
    pub manifold: String,
    pub fields_mt: Vec<f64>,
    /// Labels, ascending.
    pub indices: Vec<usize>,
    /// `energies_mhz[k][s]` is the energy of `indices[s]` at `fields_mt[k]`.
    pub energies_mhz: Vec<Vec<f64>>,
    pub discontinuities: Vec<Discontinuity>,
}

impl BreitRabiTable {
    pub fn trace(&self, index: usize) -> Option<Vec<f64>> {
        let col = self.indices.iter().position(|&i| i == index)?;
        Some(self.energies_mhz.iter().map(|row| row[col]).collect())
    }
}

/// Overlap below which consecutive eigenvectors are reported as a label swap.
const CONTINUITY_OVERLAP: f64 = 0.5;

pub fn breit_rabi_curve(spec: &ManifoldSpec, fields_mt: &[f64]) -> Result<BreitRabiTable> {
    if fields_mt.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::domain("field grid must be sorted ascending"));
    }
    let mut energies = Vec::with_capacity(fields_mt.len());
    let mut discontinuities = Vec::new();
    let mut prev: Option<Vec<ZeemanState>> = None;
    let mut indices = Vec::new();
    for (k, &b) in fields_mt.iter().enumerate() {
        let mut states = diagonalize_manifold(spec, b)?;
        states.sort_by_key(|s| s.index);
        if let Some(p) = &prev {
            for (a, c) in p.iter().zip(&states) {
                let overlap: f64 = a
                    .composition
                    .iter()
                    .zip(&c.composition)
                    .map(|(x, y)| x * y)
                    .sum::<f64>()
                    .abs();
                if overlap < CONTINUITY_OVERLAP {
                    discontinuities.push(Discontinuity {
                        index: c.index,
                        from_mt: fields_mt[k - 1],
                        to_mt: b,
                        overlap,
                    });
                }
            }
        }
        indices = states.iter().map(|s| s.index).collect();
        energies.push(states.iter().map(|s| s.energy_mhz).collect());
        prev = Some(states);
    }
    Ok(BreitRabiTable {
        manifold: spec.label.clone(),
        fields_mt: fields_mt.to_vec(),
        indices,
        energies_mhz: energies,
        discontinuities,
    })
}
