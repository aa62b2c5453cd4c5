//! Cartan matrices of the simple Lie algebras, built from Dynkin diagrams.
//!
//! Entry `(i, j)` is `2 (α_i, α_j) / (α_j, α_j)` with Bourbaki/Humphreys
//! node numbering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CartanError;

pub type IntMatrix = Vec<Vec<i64>>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
    C,
    D,
    E,
    F,
    G,
}

impl Family {
    pub fn admits_rank(self, rank: usize) -> bool {
        match self {
            Family::A => rank >= 1,
            Family::B | Family::C => rank >= 2,
            Family::D => rank >= 3,
            Family::E => (6..=8).contains(&rank),
            Family::F => rank == 4,
            Family::G => rank == 2,
        }
    }
}

impl FromStr for Family {
    type Err = CartanError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Family::A),
            "B" | "b" => Ok(Family::B),
            "C" | "c" => Ok(Family::C),
            "D" | "d" => Ok(Family::D),
            "E" | "e" => Ok(Family::E),
            "F" | "f" => Ok(Family::F),
            "G" | "g" => Ok(Family::G),
            other => Err(CartanError::UnknownFamily(other.to_string())),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::A => "A",
            Family::B => "B",
            Family::C => "C",
            Family::D => "D",
            Family::E => "E",
            Family::F => "F",
            Family::G => "G",
        };
        f.write_str(s)
    }
}

/// Which matrix to build: a catalogued simple type or a user-supplied one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlgebraSpec {
    Simple { family: Family, rank: usize },
    Explicit(IntMatrix),
}

impl AlgebraSpec {
    pub fn simple(family: Family, rank: usize) -> Self {
        AlgebraSpec::Simple { family, rank }
    }

    pub fn label(&self) -> String {
        match self {
            AlgebraSpec::Simple { family, rank } => format!("{family}{rank}"),
            AlgebraSpec::Explicit(k) => format!("explicit{}x{}", k.len(), k.len()),
        }
    }
}

impl FromStr for AlgebraSpec {
    type Err = CartanError;

    /// Parses labels like `A3`, `e8`, `G2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let mut chars = s.chars();
        let fam = chars
            .next()
            .ok_or_else(|| CartanError::UnknownFamily(String::new()))?;
        let family: Family = fam.to_string().parse()?;
        let rank: usize = chars
            .as_str()
            .parse()
            .map_err(|_| CartanError::UnknownFamily(s.to_string()))?;
        Ok(AlgebraSpec::Simple { family, rank })
    }
}

fn chain(n: usize) -> IntMatrix {
    let mut k = vec![vec![0i64; n]; n];
    for i in 0..n {
        k[i][i] = 2;
        if i + 1 < n {
            k[i][i + 1] = -1;
            k[i + 1][i] = -1;
        }
    }
    k
}

fn simply_laced(n: usize, edges: &[(usize, usize)]) -> IntMatrix {
    let mut k = vec![vec![0i64; n]; n];
    for (i, row) in k.iter_mut().enumerate() {
        row[i] = 2;
    }
    for &(a, b) in edges {
        k[a - 1][b - 1] = -1;
        k[b - 1][a - 1] = -1;
    }
    k
}

/// Cartan matrix for a spec; explicit matrices are sign-checked and returned.
pub fn cartan_matrix(spec: &AlgebraSpec) -> Result<IntMatrix, CartanError> {
    match spec {
        AlgebraSpec::Explicit(k) => {
            check_sign_pattern(k)?;
            Ok(k.clone())
        }
        &AlgebraSpec::Simple { family, rank } => {
            if !family.admits_rank(rank) {
                return Err(CartanError::InvalidType { family, rank });
            }
            let n = rank;
            let k = match family {
                Family::A => chain(n),
                Family::B => {
                    let mut k = chain(n);
                    k[n - 2][n - 1] = -2;
                    k
                }
                Family::C => {
                    let mut k = chain(n);
                    k[n - 1][n - 2] = -2;
                    k
                }
                Family::D => {
                    let mut edges: Vec<(usize, usize)> = (1..n - 1).map(|i| (i, i + 1)).collect();
                    // fork: nodes n-1 and n both hang off n-2
                    edges.pop();
                    edges.push((n - 2, n));
                    if n > 3 {
                        edges.push((n - 2, n - 1));
                    } else {
                        edges.push((1, 2));
                    }
                    simply_laced(n, &edges)
                }
                Family::E => {
                    let mut edges = vec![(1, 3), (3, 4), (2, 4)];
                    for i in 4..n {
                        edges.push((i, i + 1));
                    }
                    simply_laced(n, &edges)
                }
                Family::F => vec![
                    vec![2, -1, 0, 0],
                    vec![-1, 2, -2, 0],
                    vec![0, -1, 2, -1],
                    vec![0, 0, -1, 2],
                ],
                Family::G => vec![vec![2, -1], vec![-3, 2]],
            };
            Ok(k)
        }
    }
}

pub(crate) fn check_sign_pattern(k: &IntMatrix) -> Result<(), CartanError> {
    let n = k.len();
    if n == 0 {
        return Err(CartanError::Shape("empty matrix".into()));
    }
    for (i, row) in k.iter().enumerate() {
        if row.len() != n {
            return Err(CartanError::Shape(format!(
                "row {} has {} entries, expected {}",
                i + 1,
                row.len(),
                n
            )));
        }
        for (j, &v) in row.iter().enumerate() {
            if i == j && v <= 0 {
                return Err(CartanError::SignPattern { i: i + 1, j: j + 1, value: v });
            }
            if i != j && v > 0 {
                return Err(CartanError::SignPattern { i: i + 1, j: j + 1, value: v });
            }
        }
    }
    Ok(())
}

/// Every simple type: `A`–`D` up to `max_classical_rank`, plus the exceptionals.
pub fn all_simple_types(max_classical_rank: usize) -> Vec<AlgebraSpec> {
    let mut out = Vec::new();
    for (family, min) in [(Family::A, 1), (Family::B, 2), (Family::C, 2), (Family::D, 3)] {
        for rank in min..=max_classical_rank {
            out.push(AlgebraSpec::simple(family, rank));
        }
    }
    for rank in 6..=8 {
        out.push(AlgebraSpec::simple(Family::E, rank));
    }
    out.push(AlgebraSpec::simple(Family::F, 4));
    out.push(AlgebraSpec::simple(Family::G, 2));
    out
}
