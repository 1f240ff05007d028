use serde::{Deserialize, Serialize};

use super::{AffineBranch, BernoulliMap, Cell, SignedPermutation};
use crate::error::{Error, Result};
use crate::exact::Real;

/// JSON form of a map:
/// `{"d": 1, "branches": [{"origin": [0], "side": "1/3", "D": [[1]], "e": [0]}]}`.
///
/// `D` may be a dense matrix or, in one dimension, a bare sign. `e` is
/// optional; when absent it is chosen so the branch maps its cell onto `[0,1)^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(default)]
    pub name: Option<String>,
    pub d: usize,
    pub branches: Vec<BranchSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BranchSpec {
    pub origin: Vec<Real>,
    pub side: SideSpec,
    #[serde(rename = "D", default)]
    pub d_mat: Option<DSpec>,
    #[serde(default)]
    pub e: Option<Vec<Real>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SideSpec {
    Cube(Real),
    Box(Vec<Real>),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DSpec {
    Sign(i64),
    Matrix(Vec<Vec<i64>>),
}

impl MapSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<BernoulliMap> {
        let d = self.d;
        let mut branches = Vec::with_capacity(self.branches.len());
        for (i, b) in self.branches.iter().enumerate() {
            if b.origin.len() != d {
                return Err(Error::InvalidMap(format!("branch {i}: origin has {} coordinates", b.origin.len())));
            }
            let extent = match &b.side {
                SideSpec::Cube(s) => vec![*s; d],
                SideSpec::Box(v) if v.len() == d => v.clone(),
                SideSpec::Box(v) => {
                    return Err(Error::InvalidMap(format!("branch {i}: side has {} entries", v.len())))
                }
            };
            let d_mat = match &b.d_mat {
                None => SignedPermutation::identity(d),
                Some(DSpec::Sign(s)) if d == 1 => SignedPermutation::from_matrix(&[vec![*s]])?,
                Some(DSpec::Sign(_)) => {
                    return Err(Error::InvalidMap(format!("branch {i}: scalar D only allowed in one dimension")))
                }
                Some(DSpec::Matrix(rows)) => SignedPermutation::from_matrix(rows)?,
            };
            let branch = match &b.e {
                None => AffineBranch::onto_unit(b.origin.clone(), extent, d_mat),
                Some(e) if e.len() == d => AffineBranch {
                    cell: Cell { origin: b.origin.clone(), extent },
                    d_mat,
                    offset: e.clone(),
                },
                Some(e) => return Err(Error::InvalidMap(format!("branch {i}: e has {} entries", e.len()))),
            };
            branches.push(branch);
        }
        BernoulliMap::new(self.name.clone().unwrap_or_else(|| "custom".into()), branches)
    }

    /// Round-trips a map back to its JSON form.
    pub fn from_map(map: &BernoulliMap) -> Self {
        let branches = map
            .branches()
            .iter()
            .map(|b| BranchSpec {
                origin: b.cell.origin.clone(),
                side: match b.cell.side() {
                    Some(s) => SideSpec::Cube(s),
                    None => SideSpec::Box(b.cell.extent.clone()),
                },
                d_mat: Some(DSpec::Matrix(b.d_mat.to_matrix())),
                e: Some(b.offset.clone()),
            })
            .collect();
        Self { name: Some(map.name.clone()), d: map.dim(), branches }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fraction_strings() {
        let text = r#"{"d":1,"branches":[
            {"origin":[0],"side":"1/3","D":1},
            {"origin":["1/3"],"side":"2/3","D":-1}]}"#;
        let map = MapSpec::from_json(text).unwrap().build().unwrap();
        assert_eq!(map.branch_count(), 2);
        assert!(map.is_exact());
        assert!((map.apply(&[0.5])[0] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn explicit_offset_is_kept() {
        let text = r#"{"d":1,"branches":[
            {"origin":[0],"side":0.5,"D":[[1]],"e":[0]},
            {"origin":[0.5],"side":0.5,"D":[[1]],"e":[-1]}]}"#;
        let map = MapSpec::from_json(text).unwrap().build().unwrap();
        assert!((map.apply(&[0.75])[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_permutation_d() {
        let text = r#"{"d":2,"branches":[{"origin":[0,0],"side":1,"D":[[1,1],[0,1]]}]}"#;
        assert!(MapSpec::from_json(text).unwrap().build().is_err());
    }

    #[test]
    fn round_trip() {
        let map = super::super::map_preset("intro3").unwrap();
        let json = serde_json::to_string(&MapSpec::from_map(&map)).unwrap();
        let back = MapSpec::from_json(&json).unwrap().build().unwrap();
        for x in [0.1, 0.4, 0.9] {
            assert_eq!(map.apply(&[x]), back.apply(&[x]));
        }
    }
}
