//! Text checkpoints for [`PolicyParams`].
//!
//! ```text
//! rlho-policy 1
//! dims <input_dim> <hidden> <n_actions>
//! tensor <name> <rows> <cols>
//! <rows * cols whitespace-separated floats>
//! ...
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a load of a saved
//! checkpoint reproduces every parameter bit for bit.

use std::fmt::Write as _;
use std::path::Path;

use super::network::PolicyParams;
use crate::error::{Error, Result};

const MAGIC: &str = "rlho-policy";
const VERSION: u32 = 1;

pub fn to_text(params: &PolicyParams) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(
        out,
        "dims {} {} {}",
        params.input_dim(),
        params.hidden(),
        params.n_actions()
    );
    for slot in params.slots() {
        let _ = writeln!(out, "tensor {} {} {}", slot.name, slot.rows, slot.cols);
        let values: Vec<String> = params.data[slot.range]
            .iter()
            .map(|v| format!("{v:e}"))
            .collect();
        let _ = writeln!(out, "{}", values.join(" "));
    }
    out
}

pub fn from_text(text: &str) -> Result<PolicyParams> {
    let bad = |msg: String| Error::invalid(format!("checkpoint: {msg}"));
    let mut lines = text.lines();

    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    match header.as_slice() {
        [MAGIC, v] if *v == VERSION.to_string() => {}
        _ => return Err(bad(format!("unrecognized header {header:?}"))),
    }
    let dims: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| bad(format!("`{s}`: {e}")));
    let (input_dim, hidden, n_actions) = match dims.as_slice() {
        ["dims", a, b, c] => (parse_usize(a)?, parse_usize(b)?, parse_usize(c)?),
        _ => return Err(bad(format!("expected dims line, got {dims:?}"))),
    };

    let expected = PolicyParams::zeros(n_actions, hidden);
    if expected.input_dim() != input_dim {
        return Err(bad(format!(
            "input dim {input_dim} does not match {n_actions} actions"
        )));
    }
    let mut data = Vec::with_capacity(expected.data.len());
    for slot in expected.slots() {
        let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
        let shape_ok = matches!(head.as_slice(),
            ["tensor", name, r, c] if *name == slot.name
                && parse_usize(r).ok() == Some(slot.rows)
                && parse_usize(c).ok() == Some(slot.cols));
        if !shape_ok {
            return Err(bad(format!(
                "expected tensor {} {}x{}, got {head:?}",
                slot.name, slot.rows, slot.cols
            )));
        }
        let values = lines
            .next()
            .unwrap_or("")
            .split_whitespace()
            .map(|v| v.parse::<f64>().map_err(|e| bad(format!("`{v}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != slot.range.len() {
            return Err(bad(format!(
                "tensor {} has {} values, expected {}",
                slot.name,
                values.len(),
                slot.range.len()
            )));
        }
        data.extend(values);
    }
    PolicyParams::from_parts(input_dim, hidden, n_actions, data)
}

pub fn save(params: &PolicyParams, path: &Path) -> Result<()> {
    std::fs::write(path, to_text(params)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<PolicyParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_text(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(values in prop::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..64), seed in any::<u64>()) {
            let mut p = PolicyParams::init(3, 4, &mut crate::rng::from_seed(seed));
            for (slot, v) in p.data.iter_mut().zip(values.iter().cycle()) {
                *slot = *v;
            }
            let back = from_text(&to_text(&p)).unwrap();
            prop_assert_eq!(back.data.len(), p.data.len());
            for (a, b) in back.data.iter().zip(&p.data) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn rejects_wrong_version_and_shape() {
        let p = PolicyParams::zeros(3, 4);
        let text = to_text(&p);
        assert!(from_text(&text.replace("rlho-policy 1", "rlho-policy 9")).is_err());
        assert!(
            from_text(&text.replace("tensor value.bias 1 1", "tensor value.bias 2 1")).is_err()
        );
        assert!(from_text(&text.replace("dims 8 4 3", "dims 9 4 3")).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("policy.txt");
        let p = PolicyParams::init(5, 6, &mut crate::rng::from_seed(1));
        save(&p, &path).unwrap();
        assert_eq!(load(&path).unwrap(), p);
    }
}
