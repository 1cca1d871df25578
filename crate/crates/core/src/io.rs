//! File formats: profile and Fourier CSVs with JSON sidecars, eigenpair
//! JSON, ASCII mesh dumps, and checksummed nodal-field files. Floats print
//! with 17 significant digits so that emitted values parse back bit-equal.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audit::AuditReport;
use crate::error::{Error, Result};
use crate::fem::ScalarField;
use crate::frequency::{FourierTable, RadialProfile};
use crate::geo::coords_checksum;
use crate::sphere::{SphereMesh, SphericalEigenpair};
use crate::tetmesh::TetMesh;

/// 17 significant digits: the shortest width guaranteeing that every f64
/// round-trips through decimal.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProfileSidecar {
    pub ell: f64,
    pub k0: Option<u32>,
    pub eps_bar: f64,
}

/// CSV with header `r,H,D,N`, one row per radius.
pub fn profile_to_csv(profile: &RadialProfile) -> Result<String> {
    if profile.radii.is_empty() {
        return Err(Error::Format("refusing to emit an empty profile".into()));
    }
    let mut out = String::from("r,H,D,N\n");
    for i in 0..profile.radii.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(profile.radii[i]),
            fmt_f64(profile.height[i]),
            fmt_f64(profile.energy[i]),
            fmt_f64(profile.frequency[i]),
        );
    }
    Ok(out)
}

pub fn profile_sidecar(profile: &RadialProfile) -> ProfileSidecar {
    ProfileSidecar { ell: profile.ell_estimate, k0: profile.k0, eps_bar: profile.eps_bar }
}

/// Parse a profile CSV back; the sidecar fields are not part of the CSV.
pub fn profile_from_csv(text: &str) -> Result<RadialProfile> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty profile CSV".into()))?;
    if header.trim() != "r,H,D,N" {
        return Err(Error::Format(format!("unexpected profile header {header:?}")));
    }
    let mut profile = RadialProfile {
        radii: vec![],
        height: vec![],
        energy: vec![],
        frequency: vec![],
        eps_bar: 0.0,
        ell_estimate: f64::NAN,
        k0: None,
        fit_report: vec![],
    };
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::Format(format!("bad profile row {line:?}")));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|e| Error::Format(format!("bad float {s:?}: {e}")))
        };
        profile.radii.push(parse(cells[0])?);
        profile.height.push(parse(cells[1])?);
        profile.energy.push(parse(cells[2])?);
        profile.frequency.push(parse(cells[3])?);
    }
    Ok(profile)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierSummary {
    pub ell: f64,
    pub k0: u32,
    pub beta: Vec<f64>,
    #[serde(rename = "R")]
    pub r_used: f64,
}

/// CSV with header `lambda,k,m,phi,upsilon`: one row per (lambda, member).
pub fn fourier_to_csv(table: &FourierTable) -> String {
    let mut out = String::from("lambda,k,m,phi,upsilon\n");
    for (j, &l) in table.lambdas.iter().enumerate() {
        for m in 0..table.phi.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(l),
                table.k0,
                m + 1,
                fmt_f64(table.phi[m][j]),
                fmt_f64(table.upsilon[m][j]),
            );
        }
    }
    out
}

pub fn fourier_summary(table: &FourierTable) -> FourierSummary {
    FourierSummary {
        ell: table.k0 as f64 / 2.0,
        k0: table.k0,
        beta: table.beta.clone(),
        r_used: table.r_used,
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EigenpairsFile {
    pub h: f64,
    pub pairs: Vec<EigenpairEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EigenpairEntry {
    pub mu: f64,
    pub k_index: Option<u32>,
    pub multiplicity_cluster: usize,
    pub psi_nodal: Vec<f64>,
}

pub fn eigenpairs_to_json(mesh: &SphereMesh, pairs: &[SphericalEigenpair]) -> Result<String> {
    let file = EigenpairsFile {
        h: mesh.mesh_size,
        pairs: pairs
            .iter()
            .map(|p| EigenpairEntry {
                mu: p.mu,
                k_index: p.k_index,
                multiplicity_cluster: p.multiplicity_cluster,
                psi_nodal: p.psi.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| Error::Format(e.to_string()))
}

/// ASCII sphere mesh: vertex lines, triangle lines, one cut-vertex line.
pub fn sphere_mesh_to_ascii(mesh: &SphereMesh) -> String {
    let mut out = String::from("cracklab spheremesh v1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]));
    }
    let _ = writeln!(out, "triangles {}", mesh.triangles.len());
    for t in &mesh.triangles {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    let cut: Vec<String> = mesh.cut_vertices.iter().map(|v| v.to_string()).collect();
    let _ = writeln!(out, "cut {}", cut.join(" "));
    out
}

/// ASCII tet mesh: vertices, tets, then the marked face lists.
pub fn tet_mesh_to_ascii(mesh: &TetMesh) -> String {
    let mut out = String::from("cracklab tetmesh v1\n");
    let _ = writeln!(out, "vertices {}", mesh.vertices.len());
    for v in &mesh.vertices {
        let _ = writeln!(out, "{} {} {}", fmt_f64(v[0]), fmt_f64(v[1]), fmt_f64(v[2]));
    }
    let _ = writeln!(out, "tets {}", mesh.tets.len());
    for t in &mesh.tets {
        let _ = writeln!(out, "{} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    for (name, faces) in [
        ("crack_faces", &mesh.crack_faces),
        ("sphere_faces", &mesh.sphere_faces),
        ("gamma_faces", &mesh.gamma_faces),
    ] {
        let _ = writeln!(out, "{name} {}", faces.len());
        for f in faces.iter() {
            let _ = writeln!(out, "{} {} {}", f[0], f[1], f[2]);
        }
    }
    out
}

/// Nodal field with a checksum binding it to its mesh: the header carries
/// FNV-1a over the vertex coordinate bytes.
pub fn field_to_ascii(field: &ScalarField) -> String {
    let checksum = coords_checksum(&field.mesh.vertices);
    let mut out = format!(
        "cracklab field v1 checksum={checksum:016x} n={}\n",
        field.nodal.len()
    );
    for v in &field.nodal {
        let _ = writeln!(out, "{}", fmt_f64(*v));
    }
    out
}

/// Parse a field file against its mesh, verifying the checksum.
pub fn field_from_ascii(text: &str, mesh: &std::sync::Arc<TetMesh>) -> Result<ScalarField> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty field file".into()))?;
    let mut checksum = None;
    let mut count = None;
    for token in header.split_whitespace() {
        if let Some(hex) = token.strip_prefix("checksum=") {
            checksum = u64::from_str_radix(hex, 16).ok();
        }
        if let Some(n) = token.strip_prefix("n=") {
            count = n.parse::<usize>().ok();
        }
    }
    let checksum = checksum.ok_or_else(|| Error::Format("missing checksum".into()))?;
    let count = count.ok_or_else(|| Error::Format("missing node count".into()))?;
    let expected = coords_checksum(&mesh.vertices);
    if checksum != expected {
        return Err(Error::Format(format!(
            "field checksum {checksum:016x} does not match mesh {expected:016x}"
        )));
    }
    if count != mesh.n_vertices() {
        return Err(Error::Format(format!(
            "field has {count} nodes, mesh has {}",
            mesh.n_vertices()
        )));
    }
    let mut nodal = Vec::with_capacity(count);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        nodal.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad nodal value {line:?}: {e}")))?,
        );
    }
    if nodal.len() != count {
        return Err(Error::Format(format!("expected {count} values, found {}", nodal.len())));
    }
    Ok(ScalarField { mesh: mesh.clone(), nodal, dirichlet_mask: vec![false; count] })
}

/// Human-readable audit table.
pub fn audit_table(reports: &[AuditReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<20} {:>14} {:>14} {:>12} {:>12} {:>6}  context",
        "audit", "lhs", "rhs", "residual", "tolerance", "pass"
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{:<20} {:>14.6e} {:>14.6e} {:>12.4e} {:>12.4e} {:>6}  r={:?} {} {}",
            r.name,
            r.lhs,
            r.rhs,
            r.residual,
            r.tolerance,
            if r.pass { "ok" } else { "FAIL" },
            r.context.radius,
            r.context.field,
            r.context.mode
        );
    }
    out
}

pub fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("tmp-write");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tetmesh::mesh_slit_ball;

    #[test]
    fn float_formatting_roundtrips() {
        for v in [0.1, -3.141592653589793, 1e-300, 7.234567890123456e17, 0.75] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s} -> {back}");
        }
    }

    #[test]
    fn profile_csv_roundtrip_is_bit_exact() {
        let profile = RadialProfile {
            radii: vec![0.1, 0.2, 0.4],
            height: vec![0.418879020478639, 1.675516081914556, 6.702064327658226],
            energy: vec![0.41887902047863906, 1.6755160819145565, 6.7020643276582255],
            frequency: vec![1.0000000000000002, 0.9999999999999999, 1.0],
            eps_bar: 0.0,
            ell_estimate: 1.0,
            k0: Some(2),
            fit_report: vec![],
        };
        let csv = profile_to_csv(&profile).unwrap();
        let back = profile_from_csv(&csv).unwrap();
        for i in 0..3 {
            assert_eq!(profile.radii[i].to_bits(), back.radii[i].to_bits());
            assert_eq!(profile.height[i].to_bits(), back.height[i].to_bits());
            assert_eq!(profile.energy[i].to_bits(), back.energy[i].to_bits());
            assert_eq!(profile.frequency[i].to_bits(), back.frequency[i].to_bits());
        }
        // sidecar carries the fit results
        let sidecar = profile_sidecar(&profile);
        let json = serde_json::to_string(&sidecar).unwrap();
        let parsed: ProfileSidecar = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed, sidecar);
        // empty profiles refuse to serialize
        let empty = RadialProfile { radii: vec![], ..profile };
        assert!(profile_to_csv(&empty).is_err());
    }

    #[test]
    fn field_file_checks_mesh_binding() {
        let mesh = mesh_slit_ball(0.5, 0.125).unwrap();
        let field = ScalarField::from_fn(&mesh, |x| x[0] - 2.0 * x[2]);
        let text = field_to_ascii(&field);
        let back = field_from_ascii(&text, &mesh).unwrap();
        for (a, b) in field.nodal.iter().zip(&back.nodal) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // a different mesh fails the checksum
        let other = mesh_slit_ball(1.0, 0.25).unwrap();
        assert!(field_from_ascii(&text, &other).is_err());
    }

    #[test]
    fn mesh_ascii_has_declared_counts() {
        let mesh = mesh_slit_ball(1.0, 0.25).unwrap();
        let text = tet_mesh_to_ascii(&mesh);
        assert!(text.contains(&format!("vertices {}", mesh.n_vertices())));
        assert!(text.contains(&format!("tets {}", mesh.tets.len())));
        assert!(text.contains(&format!("crack_faces {}", mesh.crack_faces.len())));
        let sphere = crate::sphere::build_slit_sphere_mesh(2, 0.3).unwrap();
        let text = sphere_mesh_to_ascii(&sphere);
        assert!(text.starts_with("cracklab spheremesh v1"));
        assert!(text.contains(&format!("triangles {}", sphere.triangles.len())));
    }
}
