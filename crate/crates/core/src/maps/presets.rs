use super::{AffineBranch, BernoulliMap, SignedPermutation};
use crate::error::{Error, Result};
use crate::exact::Real;

/// A named map that can be selected from configs and the command line.
pub trait MapPreset: Send + Sync {
    fn name(&self) -> &'static str;
    fn description(&self) -> &'static str;
    fn build(&self) -> BernoulliMap;
}

struct Doubling;
struct Intro3;
struct Quad2d;
struct Identity;
struct Tripling;
struct Rect2d;

impl MapPreset for Doubling {
    fn name(&self) -> &'static str {
        "doubling"
    }
    fn description(&self) -> &'static str {
        "x -> 2x mod 1"
    }
    fn build(&self) -> BernoulliMap {
        uniform_expanding(2, 1).expect("doubling map is valid")
    }
}

impl MapPreset for Intro3 {
    fn name(&self) -> &'static str {
        "intro3"
    }
    fn description(&self) -> &'static str {
        "3x on [0,1/3), 3(1-x)/2 on [1/3,1)"
    }
    fn build(&self) -> BernoulliMap {
        let branches = vec![
            AffineBranch::onto_unit(vec![Real::zero()], vec![Real::frac(1, 3)], SignedPermutation::identity(1)),
            AffineBranch::onto_unit(vec![Real::frac(1, 3)], vec![Real::frac(2, 3)], SignedPermutation::reflection(1)),
        ];
        BernoulliMap::new("intro3", branches).expect("intro3 map is valid")
    }
}

impl MapPreset for Quad2d {
    fn name(&self) -> &'static str {
        "quad2d"
    }
    fn description(&self) -> &'static str {
        "(2x, 2y) mod 1 on four quadrants"
    }
    fn build(&self) -> BernoulliMap {
        let mut m = uniform_expanding(2, 2).expect("quadrant map is valid");
        m.name = "quad2d".into();
        m
    }
}

impl MapPreset for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn description(&self) -> &'static str {
        "x -> x (one branch, no expansion; baseline)"
    }
    fn build(&self) -> BernoulliMap {
        let b = AffineBranch::onto_unit(vec![Real::zero()], vec![Real::one()], SignedPermutation::identity(1));
        BernoulliMap::new("identity", vec![b]).expect("identity map is valid")
    }
}

impl MapPreset for Tripling {
    fn name(&self) -> &'static str {
        "tripling"
    }
    fn description(&self) -> &'static str {
        "x -> 3x mod 1"
    }
    fn build(&self) -> BernoulliMap {
        let mut m = uniform_expanding(3, 1).expect("tripling map is valid");
        m.name = "tripling".into();
        m
    }
}

impl MapPreset for Rect2d {
    fn name(&self) -> &'static str {
        "rect2d"
    }
    fn description(&self) -> &'static str {
        "(2x, 4y) mod 1 on 1/2 x 1/4 cells; cylinders are rectangles"
    }
    fn build(&self) -> BernoulliMap {
        let mut branches = Vec::new();
        for i in 0..2 {
            for j in 0..4 {
                branches.push(AffineBranch::onto_unit(
                    vec![Real::frac(i, 2), Real::frac(j, 4)],
                    vec![Real::frac(1, 2), Real::frac(1, 4)],
                    SignedPermutation::identity(2),
                ));
            }
        }
        BernoulliMap::new("rect2d", branches).expect("rect2d map is well formed")
    }
}

/// All registered presets.
pub fn map_presets() -> Vec<Box<dyn MapPreset>> {
    vec![
        Box::new(Doubling),
        Box::new(Intro3),
        Box::new(Quad2d),
        Box::new(Identity),
        Box::new(Tripling),
        Box::new(Rect2d),
    ]
}

/// Looks up a preset by name. `expandingN` and `expandingN_dD` build `x -> N x`.
pub fn map_preset(name: &str) -> Result<BernoulliMap> {
    if let Some(p) = map_presets().into_iter().find(|p| p.name() == name) {
        return Ok(p.build());
    }
    if let Some(rest) = name.strip_prefix("expanding") {
        let (n, d) = match rest.split_once("_d") {
            Some((n, d)) => (n, d),
            None => (rest, "1"),
        };
        if let (Ok(n), Ok(d)) = (n.parse::<u32>(), d.parse::<usize>()) {
            return uniform_expanding(n, d);
        }
    }
    Err(Error::InvalidMap(format!("unknown map preset {name:?}")))
}

/// `x -> N x mod 1` on `T^d`, with `N^d` cube branches of side `1/N`.
pub fn uniform_expanding(n: u32, d: usize) -> Result<BernoulliMap> {
    if n < 2 || d == 0 {
        return Err(Error::InvalidMap(format!("uniform expanding map needs N >= 2 and d >= 1 (got N={n}, d={d})")));
    }
    let count = (n as usize).pow(d as u32);
    let side = Real::frac(1, n as i64);
    let mut branches = Vec::with_capacity(count);
    for flat in 0..count {
        let mut rem = flat;
        let mut origin = vec![Real::zero(); d];
        // first axis varies slowest
        for axis in (0..d).rev() {
            origin[axis] = Real::frac((rem % n as usize) as i64, n as i64);
            rem /= n as usize;
        }
        branches.push(AffineBranch::onto_unit(origin, vec![side; d], SignedPermutation::identity(d)));
    }
    let name = if d == 1 { format!("expanding{n}") } else { format!("expanding{n}_d{d}") };
    let name = match (n, d) {
        (2, 1) => "doubling".to_string(),
        _ => name,
    };
    BernoulliMap::new(name, branches)
}
