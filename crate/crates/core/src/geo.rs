//! Small fixed-size vector and matrix helpers for points of R^3.
//!
//! The ambient space is R^{N+1} with N = 2 throughout the mesh and FEM
//! layers, so coordinates are plain `[f64; 3]` and 3x3 matrices are
//! `[[f64; 3]; 3]` in row-major order.

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[inline]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn mat_vec(m: &Mat3, v: Vec3) -> Vec3 {
    [dot(m[0], v), dot(m[1], v), dot(m[2], v)]
}

#[inline]
pub fn mat_sub(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][j] - b[i][j];
        }
    }
    c
}

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// Spectral norm of a symmetric 3x3 matrix (largest |eigenvalue|).
pub fn sym_spectral_norm(m: &Mat3) -> f64 {
    sym_eigenvalues(m).iter().fold(0.0, |acc, e| acc.max(e.abs()))
}

/// Smallest eigenvalue of a symmetric 3x3 matrix.
pub fn sym_min_eigenvalue(m: &Mat3) -> f64 {
    let ev = sym_eigenvalues(m);
    ev[0].min(ev[1]).min(ev[2])
}

/// Eigenvalues of a symmetric 3x3 matrix by the trigonometric closed form.
pub fn sym_eigenvalues(m: &Mat3) -> [f64; 3] {
    let p1 = m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2];
    let q = (m[0][0] + m[1][1] + m[2][2]) / 3.0;
    if p1 < 1e-300 {
        return [m[0][0], m[1][1], m[2][2]];
    }
    let d0 = m[0][0] - q;
    let d1 = m[1][1] - q;
    let d2 = m[2][2] - q;
    let p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    let mut b = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            b[i][j] = (m[i][j] - if i == j { q } else { 0.0 }) / p;
        }
    }
    let detb = b[0][0] * (b[1][1] * b[2][2] - b[1][2] * b[2][1])
        - b[0][1] * (b[1][0] * b[2][2] - b[1][2] * b[2][0])
        + b[0][2] * (b[1][0] * b[2][1] - b[1][1] * b[2][0]);
    let r = (detb / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    let e1 = q + 2.0 * p * phi.cos();
    let e3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::PI / 3.0).cos();
    let e2 = 3.0 * q - e1 - e3;
    [e1, e2, e3]
}

/// Solve a 3x3 linear system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve3(a: &Mat3, b: Vec3) -> Option<Vec3> {
    let mut m = [
        [a[0][0], a[0][1], a[0][2], b[0]],
        [a[1][0], a[1][1], a[1][2], b[1]],
        [a[2][0], a[2][1], a[2][2], b[2]],
    ];
    for col in 0..3 {
        let mut piv = col;
        for row in col + 1..3 {
            if m[row][col].abs() > m[piv][col].abs() {
                piv = row;
            }
        }
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut x = [0.0; 3];
    for col in (0..3).rev() {
        let mut s = m[col][3];
        for k in col + 1..3 {
            s -= m[col][k] * x[k];
        }
        x[col] = s / m[col][col];
    }
    Some(x)
}

/// Signed volume of the tetrahedron (a,b,c,d): positive when (b-a, c-a, d-a)
/// is a right-handed frame.
pub fn tet_signed_volume(a: Vec3, b: Vec3, c: Vec3, d: Vec3) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let w = sub(d, a);
    dot(u, cross(v, w)) / 6.0
}

/// 64-bit FNV-1a over a byte stream.
pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// FNV-1a checksum of a coordinate list (little-endian f64 bytes, in order).
pub fn coords_checksum(vertices: &[Vec3]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for v in vertices {
        for c in v {
            for b in c.to_le_bytes() {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x100000001b3);
            }
        }
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = [[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
        let mut ev = sym_eigenvalues(&m);
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 2.0).abs() < 1e-12);
        assert!((ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_shear_block() {
        // [[1, -a], [-a, 1+a^2]] (+ identity third axis) has det 1 and trace 2+a^2.
        let a = 0.3;
        let m = [[1.0, -a, 0.0], [-a, 1.0 + a * a, 0.0], [0.0, 0.0, 1.0]];
        let hi = sym_spectral_norm(&m);
        let lo = sym_min_eigenvalue(&m);
        assert!((hi * lo - 1.0).abs() < 1e-10, "product of extreme eigenvalues is det of the block");
    }

    #[test]
    fn solve3_roundtrip() {
        let a = [[2.0, 1.0, 0.0], [1.0, 3.0, 1.0], [0.0, 1.0, 4.0]];
        let x = [1.0, -2.0, 0.5];
        let b = mat_vec(&a, x);
        let got = solve3(&a, b).unwrap();
        for i in 0..3 {
            assert!((got[i] - x[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn fnv_vector_matches_bytewise() {
        let vs: Vec<Vec3> = vec![[1.0, 2.0, 3.0], [-0.5, 0.25, 1e-9]];
        let mut bytes = Vec::new();
        for v in &vs {
            for c in v {
                bytes.extend_from_slice(&c.to_le_bytes());
            }
        }
        assert_eq!(coords_checksum(&vs), fnv1a64(bytes));
    }
}
